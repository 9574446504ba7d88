#include "multibox/priors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "multibox/error.hpp"
#include "multibox/rng.hpp"

namespace multibox {

namespace {

struct LloydResult {
  std::vector<NormBox> centroids;
  std::vector<double> trace;
  int iterations = 0;
};

int nearest(const NormBox& p, const std::vector<NormBox>& centroids, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

std::vector<NormBox> kmeanspp_init(std::span<const NormBox> boxes, int k, Rng& rng) {
  std::vector<NormBox> centroids;
  centroids.reserve(k);
  centroids.push_back(boxes[rng.below(boxes.size())]);
  std::vector<double> d2(boxes.size());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      nearest(boxes[i], centroids, &d2[i]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.below(boxes.size());
    } else {
      double target = rng.uniform() * total;
      pick = boxes.size() - 1;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (d2[i] <= 0.0) continue;
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(boxes[pick]);
  }
  return centroids;
}

LloydResult lloyd(std::span<const NormBox> boxes, std::vector<NormBox> centroids,
                  const KMeansOptions& options) {
  const std::size_t k = centroids.size();
  LloydResult r;
  std::vector<int> label(boxes.size());
  std::vector<double> dist(boxes.size());
  for (int it = 0; it < options.max_iterations; ++it) {
    for (std::size_t i = 0; i < boxes.size(); ++i) label[i] = nearest(boxes[i], centroids, &dist[i]);

    std::vector<std::array<double, 4>> sum(k, {0.0, 0.0, 0.0, 0.0});
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto c = boxes[i].coords();
      auto& s = sum[label[i]];
      for (int d = 0; d < 4; ++d) s[d] += c[d];
      ++count[label[i]];
    }

    std::vector<NormBox> next(k);
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) continue;
      const double n = static_cast<double>(count[c]);
      next[c] = {sum[c][0] / n, sum[c][1] / n, sum[c][2] / n, sum[c][3] / n};
    }
    // Empty clusters take over the worst-fit point, one point per cluster.
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      next[c] = boxes[far];
      dist[far] = 0.0;
    }

    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      movement = std::max(movement, std::sqrt(squared_distance(next[c], centroids[c])));
    }
    centroids = std::move(next);
    r.trace.push_back(kmeans_objective(boxes, centroids));
    r.iterations = it + 1;
    if (movement < options.tolerance) break;
  }
  r.centroids = std::move(centroids);
  return r;
}

LloydResult best_run(std::span<const NormBox> boxes, int k, std::uint64_t seed,
                     const KMeansOptions& options) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  if (boxes.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::TooFewBoxes, "need at least " + std::to_string(k) + " boxes, got " +
                                            std::to_string(boxes.size()));
  }
  LloydResult best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    Rng rng(mix_seed(seed + static_cast<std::uint64_t>(restart)));
    LloydResult run = lloyd(boxes, kmeanspp_init(boxes, k, rng), options);
    const double obj = kmeans_objective(boxes, run.centroids);
    if (obj < best_obj) {
      best_obj = obj;
      best = std::move(run);
    }
  }
  return best;
}

}  // namespace

double kmeans_objective(std::span<const NormBox> boxes, std::span<const NormBox> centroids) {
  double total = 0.0;
  for (const auto& b : boxes) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centroids) best = std::min(best, squared_distance(b, c));
    total += best;
  }
  return total;
}

PriorSet fit_priors(std::span<const NormBox> boxes, int k, std::uint64_t seed,
                    const KMeansOptions& options) {
  LloydResult run = best_run(boxes, k, seed, options);
  PriorSet set;
  set.seed = seed;
  set.iterations = run.iterations;
  set.priors.reserve(run.centroids.size());
  for (const auto& c : run.centroids) set.priors.push_back(clip(c));
  std::sort(set.priors.begin(), set.priors.end(), [](const NormBox& a, const NormBox& b) {
    return a.coords() < b.coords();
  });
  return set;
}

std::vector<double> kmeans_trace(std::span<const NormBox> boxes, int k, std::uint64_t seed,
                                 const KMeansOptions& options) {
  return best_run(boxes, k, seed, options).trace;
}

Vec4 encode_residual(const NormBox& prior, const NormBox& target) noexcept {
  return {target.xmin - prior.xmin, target.ymin - prior.ymin, target.xmax - prior.xmax,
          target.ymax - prior.ymax};
}

Vec4 apply_residual(const NormBox& prior, const Vec4& residual) noexcept {
  return {prior.xmin + residual[0], prior.ymin + residual[1], prior.xmax + residual[2],
          prior.ymax + residual[3]};
}

NormBox to_box(const Vec4& location) noexcept {
  NormBox b = NormBox::from_coords(location);
  if (b.xmin > b.xmax) std::swap(b.xmin, b.xmax);
  if (b.ymin > b.ymax) std::swap(b.ymin, b.ymax);
  return clip(b);
}

NormBox decode(const NormBox& prior, const Vec4& residual) noexcept {
  return to_box(apply_residual(prior, residual));
}

void write_priors(std::ostream& out, const PriorSet& priors) {
  out << "multibox-priors v1 k=" << priors.size() << " seed=" << priors.seed << '\n';
  char line[160];
  for (const auto& p : priors.priors) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.17g\n", p.xmin, p.ymin, p.xmax, p.ymax);
    out << line;
  }
}

PriorSet read_priors(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::IoError, "priors file is empty");
  std::istringstream hs(header);
  std::string magic, version, kfield, seedfield;
  hs >> magic >> version >> kfield >> seedfield;
  if (magic != "multibox-priors" || version != "v1" || kfield.rfind("k=", 0) != 0 ||
      seedfield.rfind("seed=", 0) != 0) {
    throw Error(ErrorCode::IoError, "bad priors header: " + header);
  }
  PriorSet set;
  std::size_t k = 0;
  try {
    k = std::stoull(kfield.substr(2));
    set.seed = std::stoull(seedfield.substr(5));
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, "bad priors header: " + header);
  }
  std::string line;
  while (set.priors.size() < k && std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[4];
    if (!(ls >> f[0] >> f[1] >> f[2] >> f[3])) {
      throw Error(ErrorCode::IoError, "bad priors line: " + line);
    }
    NormBox b;
    try {
      b = {std::stod(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3])};
    } catch (const std::exception&) {
      throw Error(ErrorCode::IoError, "bad priors line: " + line);
    }
    set.priors.push_back(b);
  }
  if (set.priors.size() != k) {
    throw Error(ErrorCode::IoError, "priors file declares k=" + std::to_string(k) + " but has " +
                                        std::to_string(set.priors.size()) + " rows");
  }
  return set;
}

void save_priors(const std::string& path, const PriorSet& priors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_priors(out, priors);
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

PriorSet load_priors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  PriorSet set = read_priors(in);
  set.source = path;
  return set;
}

}  // namespace multibox
