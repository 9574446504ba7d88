#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "multibox/geometry.hpp"
#include "multibox/postprocess.hpp"

namespace multibox {

struct GroundTruthBox {
  NormBox box;
  int class_label = -1;
};

using ImageDetections = std::vector<Detection>;
using ImageGroundTruth = std::vector<GroundTruthBox>;

struct MatchedDetection {
  std::size_t image = 0;
  std::size_t index = 0;  ///< position within the image's detection list
  double score = 0.0;
  bool true_positive = false;
};

/// Pascal-style greedy matching. Detections are visited by descending
/// score (ties keep image, then list order); each claims the unclaimed
/// ground truth with the highest overlap >= iou_threshold (same class when
/// class_aware). Returned in visiting order.
std::vector<MatchedDetection> match_detections(std::span<const ImageDetections> dets,
                                               std::span<const ImageGroundTruth> gt, double iou_threshold,
                                               bool class_aware);

/// Fraction of all ground-truth objects claimed when each image keeps only
/// its first n detections (lists are expected in confidence order).
double detection_rate(std::span<const ImageDetections> dets, std::span<const ImageGroundTruth> gt,
                      double iou_threshold, int n);

struct BudgetCurve {
  std::vector<std::pair<int, double>> points;  ///< (n, rate) for n = 1..max_n
};

BudgetCurve budget_curve(std::span<const ImageDetections> dets, std::span<const ImageGroundTruth> gt,
                         double iou_threshold, int max_n);

enum class ApStyle { voc2007_11pt, auc };

struct PRPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;
  double ap = 0.0;
};

/// `matched` must be sorted by descending score, as match_detections
/// returns it. Empty result when total_gt == 0 (AP undefined).
std::optional<PRCurve> average_precision(std::span<const MatchedDetection> matched, std::size_t total_gt,
                                         ApStyle style);

/// Keeps the highest-scoring detection of every class, in score order.
ImageDetections top_per_class(std::span<const Detection> dets);

/// Fraction of images where one of the first k (class, box) guesses has the
/// right class and overlap >= iou_threshold with a ground truth of that
/// class. Throws DuplicateClassInTopK if a class repeats among the k.
double detection_at_k(std::span<const ImageDetections> dets, std::span<const ImageGroundTruth> gt, int k,
                      double iou_threshold = 0.5);

struct ClassReport {
  int class_label = 0;
  std::size_t num_gt = 0;
  std::optional<PRCurve> curve;
};

struct EvalSummary {
  std::vector<ClassReport> per_class;
  std::optional<double> mean_ap;
  std::optional<PRCurve> agnostic;
  BudgetCurve budget;
  std::optional<double> detection_at_5;
};

struct EvalOptions {
  double iou_threshold = 0.5;
  int max_budget = 16;
  int num_classes = 0;
  ApStyle style = ApStyle::voc2007_11pt;
};

/// Runs every metric over a detection set. Per-class AP is computed only
/// when detections carry class labels.
EvalSummary evaluate(std::span<const ImageDetections> dets, std::span<const ImageGroundTruth> gt,
                     const EvalOptions& options);

void write_budget_csv(std::ostream& out, const BudgetCurve& curve);
void write_pr_csv(std::ostream& out, const PRCurve& curve);
void write_summary_csv(std::ostream& out, const EvalSummary& summary);

}  // namespace multibox
