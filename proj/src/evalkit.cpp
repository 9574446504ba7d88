#include "multibox/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>

#include "multibox/error.hpp"

namespace multibox {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Greedy claim of a single detection against one image's ground truth.
bool claim(const Detection& d, const ImageGroundTruth& gt, std::vector<char>& claimed, double iou_threshold,
           bool class_aware) {
  int best = -1;
  double best_iou = -1.0;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (claimed[g]) continue;
    if (class_aware && (!d.class_label || *d.class_label != gt[g].class_label)) continue;
    const double iou = jaccard(d.box, gt[g].box);
    if (iou >= iou_threshold && iou > best_iou) {
      best_iou = iou;
      best = static_cast<int>(g);
    }
  }
  if (best < 0) return false;
  claimed[static_cast<std::size_t>(best)] = 1;
  return true;
}

void require_same_images(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::ShapeMismatch, "detections and ground truth cover different image counts");
}

}  // namespace

std::vector<MatchedDetection> match_detections(std::span<const ImageDetections> dets,
                                               std::span<const ImageGroundTruth> gt, double iou_threshold,
                                               bool class_aware) {
  require_same_images(dets.size(), gt.size());
  std::vector<MatchedDetection> all;
  for (std::size_t img = 0; img < dets.size(); ++img) {
    for (std::size_t i = 0; i < dets[img].size(); ++i) all.push_back({img, i, dets[img][i].score(), false});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const MatchedDetection& a, const MatchedDetection& b) { return a.score > b.score; });
  std::vector<std::vector<char>> claimed(gt.size());
  for (std::size_t img = 0; img < gt.size(); ++img) claimed[img].assign(gt[img].size(), 0);
  for (auto& m : all) {
    m.true_positive = claim(dets[m.image][m.index], gt[m.image], claimed[m.image], iou_threshold, class_aware);
  }
  return all;
}

double detection_rate(std::span<const ImageDetections> dets, std::span<const ImageGroundTruth> gt,
                      double iou_threshold, int n) {
  require_same_images(dets.size(), gt.size());
  std::size_t total = 0;
  std::size_t found = 0;
  for (std::size_t img = 0; img < gt.size(); ++img) {
    total += gt[img].size();
    std::vector<char> claimed(gt[img].size(), 0);
    const std::size_t limit = std::min(dets[img].size(), static_cast<std::size_t>(std::max(n, 0)));
    for (std::size_t i = 0; i < limit; ++i) {
      if (claim(dets[img][i], gt[img], claimed, iou_threshold, false)) ++found;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(total);
}

BudgetCurve budget_curve(std::span<const ImageDetections> dets, std::span<const ImageGroundTruth> gt,
                         double iou_threshold, int max_n) {
  BudgetCurve curve;
  for (int n = 1; n <= max_n; ++n) curve.points.emplace_back(n, detection_rate(dets, gt, iou_threshold, n));
  return curve;
}

std::optional<PRCurve> average_precision(std::span<const MatchedDetection> matched, std::size_t total_gt,
                                         ApStyle style) {
  if (total_gt == 0) return std::nullopt;
  PRCurve curve;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    if (matched[i].true_positive) ++tp;
    curve.points.push_back({matched[i].score, static_cast<double>(tp) / static_cast<double>(total_gt),
                            static_cast<double>(tp) / static_cast<double>(i + 1)});
  }

  if (style == ApStyle::voc2007_11pt) {
    double sum = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double best = 0.0;
      for (const auto& p : curve.points) {
        if (p.recall >= r) best = std::max(best, p.precision);
      }
      sum += best;
    }
    curve.ap = sum / 11.0;
  } else {
    std::vector<double> rec{0.0}, prec{0.0};
    for (const auto& p : curve.points) {
      rec.push_back(p.recall);
      prec.push_back(p.precision);
    }
    rec.push_back(1.0);
    prec.push_back(0.0);
    for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
    double ap = 0.0;
    for (std::size_t i = 1; i < rec.size(); ++i) ap += (rec[i] - rec[i - 1]) * prec[i];
    curve.ap = ap;
  }
  curve.ap = std::clamp(curve.ap, 0.0, 1.0);
  return curve;
}

ImageDetections top_per_class(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score() > dets[b].score(); });
  std::set<int> seen;
  ImageDetections out;
  for (std::size_t i : order) {
    const int label = dets[i].class_label.value_or(-1);
    if (seen.insert(label).second) out.push_back(dets[i]);
  }
  return out;
}

double detection_at_k(std::span<const ImageDetections> dets, std::span<const ImageGroundTruth> gt, int k,
                      double iou_threshold) {
  require_same_images(dets.size(), gt.size());
  if (gt.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t img = 0; img < gt.size(); ++img) {
    const std::size_t limit = std::min(dets[img].size(), static_cast<std::size_t>(std::max(k, 0)));
    std::set<int> classes;
    bool hit = false;
    for (std::size_t i = 0; i < limit; ++i) {
      const Detection& d = dets[img][i];
      const int label = d.class_label.value_or(-1);
      if (!classes.insert(label).second) {
        throw Error(ErrorCode::DuplicateClassInTopK,
                    "class " + std::to_string(label) + " appears twice in the top " + std::to_string(k) +
                        " of image " + std::to_string(img));
      }
      for (const auto& g : gt[img]) {
        if (d.class_label && *d.class_label == g.class_label && jaccard(d.box, g.box) >= iou_threshold) hit = true;
      }
    }
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

EvalSummary evaluate(std::span<const ImageDetections> dets, std::span<const ImageGroundTruth> gt,
                     const EvalOptions& options) {
  require_same_images(dets.size(), gt.size());
  EvalSummary s;

  // Class-agnostic views: confidence-ranked lists for the budget curve.
  std::vector<ImageDetections> by_conf(dets.begin(), dets.end());
  for (auto& list : by_conf) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Detection& a, const Detection& b) { return a.localizer_conf > b.localizer_conf; });
  }
  s.budget = budget_curve(by_conf, gt, options.iou_threshold, options.max_budget);

  std::vector<ImageDetections> agnostic(by_conf);
  for (auto& list : agnostic) {
    for (auto& d : list) {
      d.combined_score = std::nullopt;
      d.class_label = std::nullopt;
      d.class_score = std::nullopt;
    }
  }
  std::size_t total_gt = 0;
  for (const auto& g : gt) total_gt += g.size();
  s.agnostic = average_precision(match_detections(agnostic, gt, options.iou_threshold, false), total_gt,
                                 options.style);

  const bool labelled = std::any_of(dets.begin(), dets.end(), [](const ImageDetections& list) {
    return std::any_of(list.begin(), list.end(), [](const Detection& d) { return d.class_label.has_value(); });
  });
  if (!labelled) return s;

  double ap_sum = 0.0;
  int ap_count = 0;
  for (int c = 0; c < options.num_classes; ++c) {
    std::vector<ImageDetections> cd(dets.size());
    std::vector<ImageGroundTruth> cg(gt.size());
    ClassReport report{c, 0, std::nullopt};
    for (std::size_t img = 0; img < dets.size(); ++img) {
      for (const auto& d : dets[img]) {
        if (d.class_label == c) cd[img].push_back(d);
      }
      for (const auto& g : gt[img]) {
        if (g.class_label == c) cg[img].push_back(g);
      }
      report.num_gt += cg[img].size();
    }
    report.curve = average_precision(match_detections(cd, cg, options.iou_threshold, true), report.num_gt,
                                     options.style);
    if (report.curve) {
      ap_sum += report.curve->ap;
      ++ap_count;
    }
    s.per_class.push_back(std::move(report));
  }
  if (ap_count > 0) s.mean_ap = ap_sum / ap_count;

  std::vector<ImageDetections> top(dets.size());
  for (std::size_t img = 0; img < dets.size(); ++img) top[img] = top_per_class(dets[img]);
  s.detection_at_5 = detection_at_k(top, gt, 5, options.iou_threshold);
  return s;
}

void write_budget_csv(std::ostream& out, const BudgetCurve& curve) {
  out << "n,rate\n";
  for (const auto& [n, rate] : curve.points) out << n << ',' << fmt(rate) << '\n';
}

void write_pr_csv(std::ostream& out, const PRCurve& curve) {
  out << "threshold,recall,precision\n";
  for (const auto& p : curve.points) out << fmt(p.threshold) << ',' << fmt(p.recall) << ',' << fmt(p.precision) << '\n';
}

void write_summary_csv(std::ostream& out, const EvalSummary& s) {
  out << "metric,value\n";
  for (const auto& c : s.per_class) {
    out << "ap_class_" << c.class_label << ',' << (c.curve ? fmt(c.curve->ap) : "absent") << '\n';
  }
  if (!s.per_class.empty()) out << "map," << (s.mean_ap ? fmt(*s.mean_ap) : "absent") << '\n';
  out << "agnostic_ap," << (s.agnostic ? fmt(s.agnostic->ap) : "absent") << '\n';
  for (const auto& [n, rate] : s.budget.points) {
    if (n == 1 || n == 5 || n == 10) out << "detection_rate_at_" << n << ',' << fmt(rate) << '\n';
  }
  if (s.detection_at_5) out << "detection_at_5," << fmt(*s.detection_at_5) << '\n';
}

}  // namespace multibox
