#include "multibox/postprocess.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "multibox/error.hpp"

namespace multibox {

std::vector<Detection> nms(std::span<const Detection> dets, double threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].localizer_conf > dets[b].localizer_conf;
  });
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    const bool clear = std::all_of(kept.begin(), kept.end(),
                                   [&](const Detection& k) { return jaccard(k.box, d.box) < threshold; });
    if (clear) kept.push_back(d);
  }
  return kept;
}

std::vector<CropWindow> crop_windows(CropStrategy strategy, int image_width, int image_height) {
  std::vector<CropWindow> windows;
  // Largest centred square, in normalized coordinates of a w x h image.
  const double side_px = std::min(image_width, image_height);
  const double sw = side_px / image_width;
  const double sh = side_px / image_height;
  windows.push_back({{0.5 - 0.5 * sw, 0.5 - 0.5 * sh, 0.5 + 0.5 * sw, 0.5 + 0.5 * sh}, "max_center"});
  if (strategy == CropStrategy::two_scale) {
    constexpr double kSide = 0.6;
    constexpr double kOffsets[3] = {0.0, 0.2, 0.4};
    for (double oy : kOffsets) {
      for (double ox : kOffsets) {
        windows.push_back({{ox, oy, ox + kSide, oy + kSide}, "grid3x3"});
      }
    }
  }
  return windows;
}

std::vector<Detection> raw_detections(const ModelParams& params, const PriorSet& priors, const Image& image,
                                      CropStrategy strategy) {
  const int side = params.topology.input_side;
  const auto windows = crop_windows(strategy, image.width, image.height);
  Eigen::MatrixXd x(side * side, static_cast<Eigen::Index>(windows.size()));
  for (std::size_t w = 0; w < windows.size(); ++w) {
    extract_crop(image, windows[w].box, side,
                 std::span<double>(x.col(static_cast<Eigen::Index>(w)).data(), static_cast<std::size_t>(side * side)));
  }
  const LocalizerActivations acts = forward_batch(params, x);
  std::vector<Detection> pooled;
  pooled.reserve(windows.size() * priors.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const PredictionSet preds = predictions_from(acts, static_cast<Eigen::Index>(w), priors);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      Detection d;
      d.box = window_to_image(to_box(preds.locations[i]), windows[w]);
      d.localizer_conf = preds.confidences[i];
      pooled.push_back(d);
    }
  }
  return pooled;
}

std::vector<Detection> localize_image(const ModelParams& params, const PriorSet& priors, const Image& image,
                                      const LocalizeOptions& options) {
  if (options.top_n <= 0) return {};
  std::vector<Detection> kept = nms(raw_detections(params, priors, image, options.strategy), options.nms_threshold);
  if (kept.size() > static_cast<std::size_t>(options.top_n)) kept.resize(static_cast<std::size_t>(options.top_n));
  return kept;
}

std::vector<Detection> score_detections(std::span<const Detection> dets, const ClassifierParams& classifier,
                                        const Image& image, SquareContext context) {
  const int side = classifier.topology.input_side;
  const int background = classifier.topology.num_classes;
  std::vector<Detection> out;
  if (dets.empty()) return out;
  Eigen::MatrixXd x(side * side, static_cast<Eigen::Index>(dets.size()));
  for (std::size_t i = 0; i < dets.size(); ++i) {
    extract_crop(image, context_square(dets[i].box, context), side,
                 std::span<double>(x.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(side * side)));
  }
  const Eigen::MatrixXd probs = classify_batch(classifier, x);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    Eigen::Index best = 0;
    probs.col(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    if (best == background) continue;
    Detection d = dets[i];
    d.class_label = static_cast<int>(best);
    d.class_score = probs(best, static_cast<Eigen::Index>(i));
    d.combined_score = d.localizer_conf * *d.class_score;
    out.push_back(d);
  }
  return out;
}

void write_detections(std::ostream& out, std::span<const DetectionRecord> records) {
  char line[256];
  for (const auto& r : records) {
    const Detection& d = r.detection;
    std::snprintf(line, sizeof line, "%llu %d %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  static_cast<unsigned long long>(r.image_id), d.class_label.value_or(-1), d.score(),
                  d.localizer_conf, d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax);
    out << line;
  }
}

std::vector<DetectionRecord> read_detections(std::istream& in) {
  std::vector<DetectionRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    unsigned long long id = 0;
    int label = -1;
    double combined = 0.0;
    DetectionRecord r;
    Detection& d = r.detection;
    if (!(ls >> id >> label >> combined >> d.localizer_conf >> d.box.xmin >> d.box.ymin >> d.box.xmax >> d.box.ymax)) {
      throw Error(ErrorCode::IoError, "bad detections line: " + line);
    }
    r.image_id = id;
    if (label >= 0) {
      d.class_label = label;
      d.combined_score = combined;
      d.class_score = d.localizer_conf > 0.0 ? combined / d.localizer_conf : 0.0;
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace multibox
