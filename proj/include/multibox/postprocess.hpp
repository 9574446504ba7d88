#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multibox/geometry.hpp"
#include "multibox/image.hpp"
#include "multibox/network.hpp"
#include "multibox/priors.hpp"
#include "multibox/training.hpp"

namespace multibox {

struct Detection {
  NormBox box;
  double localizer_conf = 0.0;
  std::optional<int> class_label;
  std::optional<double> class_score;
  /// localizer_conf * class_score once the detection has been classified.
  std::optional<double> combined_score;

  /// combined_score when present, otherwise the localizer confidence.
  double score() const noexcept { return combined_score.value_or(localizer_conf); }
};

/// Greedy suppression by localizer confidence (ties by input order). A box
/// is kept iff its Jaccard overlap with every kept box is < threshold.
std::vector<Detection> nms(std::span<const Detection> dets, double threshold);

enum class CropStrategy { max_center, two_scale };

/// max_center: the maximal centred square (the whole image for square
/// inputs). two_scale adds the 3x3 grid of 0.6-side windows with origins in
/// {0, 0.2, 0.4}.
std::vector<CropWindow> crop_windows(CropStrategy strategy, int image_width = 1, int image_height = 1);

struct LocalizeOptions {
  CropStrategy strategy = CropStrategy::max_center;
  double nms_threshold = 0.5;
  int top_n = 10;
};

/// Runs the localizer on every crop window, maps boxes back to the image,
/// pools them (crop order, then slot order), suppresses and keeps top_n.
std::vector<Detection> localize_image(const ModelParams& params, const PriorSet& priors, const Image& image,
                                      const LocalizeOptions& options);

/// All K boxes of every window before suppression, in pooling order.
std::vector<Detection> raw_detections(const ModelParams& params, const PriorSet& priors, const Image& image,
                                      CropStrategy strategy);

/// Classifies the square context of each detection. Detections whose most
/// probable output is background are dropped; the rest receive their class,
/// its probability and the combined score.
std::vector<Detection> score_detections(std::span<const Detection> dets, const ClassifierParams& classifier,
                                        const Image& image, SquareContext context = SquareContext::maximum);

/// Detections file row: `image_id class_label combined_score localizer_conf
/// xmin ymin xmax ymax`, class -1 for class-agnostic rows.
struct DetectionRecord {
  std::uint64_t image_id = 0;
  Detection detection;
};

void write_detections(std::ostream& out, std::span<const DetectionRecord> records);
std::vector<DetectionRecord> read_detections(std::istream& in);

}  // namespace multibox
