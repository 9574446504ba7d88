#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "multibox/geometry.hpp"
#include "multibox/image.hpp"

namespace multibox {

struct SceneObject {
  int class_label = 0;
  NormBox box;

  bool operator==(const SceneObject&) const = default;
};

struct Scene {
  std::uint64_t image_id = 0;
  Image image;
  std::vector<SceneObject> objects;

  std::vector<NormBox> boxes() const;
  bool operator==(const Scene&) const = default;
};

/// Shapes cycle rectangle, ellipse, triangle by class; each class has its own
/// intensity. Objects never overlap.
struct SceneConfig {
  int n_scenes = 1000;
  int num_classes = 3;
  int max_objects = 4;
  int size = 64;
  std::uint64_t seed = 0;
  double min_side = 0.12;
  double max_side = 0.45;
  double noise_sd = 8.0;
  std::uint64_t first_id = 0;
};

inline constexpr double kMinObjectArea = 0.002;

/// Scene i depends only on (config, i); generation order is irrelevant.
Scene generate_scene(const SceneConfig& config, std::size_t index);
std::vector<Scene> generate_scenes(const SceneConfig& config);

/// Exact area of (union of boxes) intersected with the window, divided by
/// the window area. 0 for a zero-area window.
double union_coverage(std::span<const NormBox> boxes, const NormBox& window);

/// Half-open coverage buckets [0,.05) [.05,.15) [.15,.5) [.5,1].
inline constexpr int kNumBuckets = 4;
inline constexpr std::array<double, kNumBuckets + 1> kBucketEdges{0.0, 0.05, 0.15, 0.5, 1.0};
int coverage_bucket(double coverage) noexcept;

struct CropSample {
  std::uint64_t image_id = 0;
  CropWindow window;
  double coverage_ratio = 0.0;
  int bucket = 0;
};

struct BucketedCrops {
  std::vector<CropSample> samples;
  /// Buckets whose attempt cap ran out before n_per_bucket samples landed.
  std::vector<int> unfillable;
};

inline constexpr int kBucketAttemptCap = 10000;

/// Rejection-samples square windows (side uniform in [0.3, 1], position
/// uniform inside the image) separately for every bucket.
BucketedCrops sample_crops_bucketed(const Scene& scene, int n_per_bucket, std::uint64_t seed);

struct ClassifierCrop {
  std::size_t scene = 0;  ///< index into the scene list the crop was drawn from
  NormBox box;
  int label = 0;  ///< class id, or num_classes for background
};

struct ClassifierCropConfig {
  double pos_iou = 0.5;
  double neg_iou = 0.2;
  int positives_per_object = 2;
  int negatives_per_positive = 2;
  /// Each corner moves by up to jitter * box side.
  double jitter = 0.15;
  std::uint64_t seed = 0;
};

std::vector<ClassifierCrop> make_classifier_crops(std::span<const Scene> scenes, int num_classes,
                                                  const ClassifierCropConfig& config);

/// One localizer training input: a square window of a scene and the ground
/// truth boxes expressed in window coordinates.
struct LocalizerExample {
  std::size_t scene = 0;
  CropWindow window;
  std::vector<NormBox> boxes;
};

struct LocalizerSetConfig {
  bool full_image = true;
  int crops_per_bucket = 0;
  /// A truncated object stays a target when this fraction of it is visible.
  double min_visible = 0.5;
  std::uint64_t seed = 0;
};

/// Ground truth of `scene` as seen through `window`, in window coordinates.
std::vector<NormBox> boxes_in_window(const Scene& scene, const NormBox& window, double min_visible);

std::vector<LocalizerExample> make_localizer_examples(std::span<const Scene> scenes,
                                                      const LocalizerSetConfig& config);

}  // namespace multibox
