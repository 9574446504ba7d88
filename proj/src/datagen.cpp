#include "multibox/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "multibox/error.hpp"
#include "multibox/rng.hpp"

namespace multibox {

namespace {

enum class Shape { rectangle, ellipse, triangle };

double class_intensity(int label, int num_classes) {
  if (num_classes <= 1) return 185.0;
  return 120.0 + 130.0 * label / (num_classes - 1);
}

bool inside(Shape shape, const NormBox& b, double x, double y) {
  if (x < b.xmin || x > b.xmax || y < b.ymin || y > b.ymax) return false;
  switch (shape) {
    case Shape::rectangle:
      return true;
    case Shape::ellipse: {
      const double dx = (x - b.center_x()) / (0.5 * b.width());
      const double dy = (y - b.center_y()) / (0.5 * b.height());
      return dx * dx + dy * dy <= 1.0;
    }
    case Shape::triangle: {
      // Apex at top centre, base along the bottom edge.
      const double t = (y - b.ymin) / b.height();
      return std::abs(x - b.center_x()) <= 0.5 * b.width() * t;
    }
  }
  return false;
}

void validate(const SceneConfig& c) {
  if (c.n_scenes < 0 || c.num_classes < 1 || c.max_objects < 1 || c.size < 4) {
    throw Error(ErrorCode::InvalidConfig, "scene config: need n>=0, classes>=1, max objects>=1");
  }
  if (!(c.min_side > 0.0 && c.min_side <= c.max_side && c.max_side <= 1.0) ||
      c.min_side * c.min_side < kMinObjectArea) {
    throw Error(ErrorCode::InvalidConfig, "scene config: object sides must satisfy "
                                          "sqrt(0.002) <= min_side <= max_side <= 1");
  }
}

}  // namespace

std::vector<NormBox> Scene::boxes() const {
  std::vector<NormBox> out;
  out.reserve(objects.size());
  for (const auto& o : objects) out.push_back(o.box);
  return out;
}

Scene generate_scene(const SceneConfig& config, std::size_t index) {
  validate(config);
  Rng rng(mix_seed(config.seed ^ mix_seed(index + 1)));
  Scene scene;
  scene.image_id = config.first_id + index;

  const int wanted = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(config.max_objects)));
  constexpr double kGap = 0.02;
  constexpr int kPlacementAttempts = 100;
  for (int n = 0; n < wanted; ++n) {
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.num_classes)));
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const double w = rng.uniform(config.min_side, config.max_side);
      const double h = rng.uniform(config.min_side, config.max_side);
      const double x = rng.uniform(0.0, 1.0 - w);
      const double y = rng.uniform(0.0, 1.0 - h);
      const NormBox box{x, y, x + w, y + h};
      const NormBox padded{x - kGap, y - kGap, x + w + kGap, y + h + kGap};
      const bool free = std::none_of(scene.objects.begin(), scene.objects.end(),
                                     [&](const SceneObject& o) { return area(intersection(o.box, padded)) > 0.0; });
      if (free) {
        scene.objects.push_back({label, box});
        break;
      }
    }
  }

  Image& img = scene.image;
  img.width = config.size;
  img.height = config.size;
  img.pixels.resize(static_cast<std::size_t>(config.size) * config.size);
  const double background = rng.uniform(20.0, 60.0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double px = (x + 0.5) / img.width;
      const double py = (y + 0.5) / img.height;
      double value = background;
      for (const auto& o : scene.objects) {
        if (inside(static_cast<Shape>(o.class_label % 3), o.box, px, py)) {
          value = class_intensity(o.class_label, config.num_classes);
        }
      }
      value += config.noise_sd * rng.normal();
      img.pixels[static_cast<std::size_t>(y) * img.width + x] =
          static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
    }
  }
  return scene;
}

std::vector<Scene> generate_scenes(const SceneConfig& config) {
  validate(config);
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(config.n_scenes));
  for (int i = 0; i < config.n_scenes; ++i) scenes.push_back(generate_scene(config, i));
  return scenes;
}

double union_coverage(std::span<const NormBox> boxes, const NormBox& window) {
  const double window_area = area(window);
  if (window_area <= 0.0) return 0.0;
  std::vector<NormBox> parts;
  std::vector<double> xs;
  for (const auto& b : boxes) {
    const NormBox c = intersection(b, window);
    if (area(c) <= 0.0) continue;
    parts.push_back(c);
    xs.push_back(c.xmin);
    xs.push_back(c.xmax);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  double covered = 0.0;
  std::vector<std::pair<double, double>> spans;
  for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
    const double x0 = xs[s];
    const double x1 = xs[s + 1];
    spans.clear();
    for (const auto& p : parts) {
      if (p.xmin <= x0 && p.xmax >= x1) spans.emplace_back(p.ymin, p.ymax);
    }
    if (spans.empty()) continue;
    std::sort(spans.begin(), spans.end());
    double length = 0.0;
    double lo = spans[0].first;
    double hi = spans[0].second;
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i].first > hi) {
        length += hi - lo;
        lo = spans[i].first;
        hi = spans[i].second;
      } else {
        hi = std::max(hi, spans[i].second);
      }
    }
    length += hi - lo;
    covered += length * (x1 - x0);
  }
  return std::clamp(covered / window_area, 0.0, 1.0);
}

int coverage_bucket(double coverage) noexcept {
  for (int b = 1; b < kNumBuckets; ++b) {
    if (coverage < kBucketEdges[b]) return b - 1;
  }
  return kNumBuckets - 1;
}

BucketedCrops sample_crops_bucketed(const Scene& scene, int n_per_bucket, std::uint64_t seed) {
  if (n_per_bucket < 0) throw Error(ErrorCode::InvalidConfig, "n_per_bucket must be >= 0");
  BucketedCrops out;
  const auto boxes = scene.boxes();
  for (int bucket = 0; bucket < kNumBuckets; ++bucket) {
    Rng rng(mix_seed(seed ^ mix_seed(scene.image_id * kNumBuckets + bucket + 1)));
    int filled = 0;
    for (int attempt = 0; attempt < kBucketAttemptCap && filled < n_per_bucket; ++attempt) {
      const double side = rng.uniform(0.3, 1.0);
      const double x = rng.uniform(0.0, 1.0 - side);
      const double y = rng.uniform(0.0, 1.0 - side);
      const NormBox window = clip({x, y, x + side, y + side});
      const double coverage = union_coverage(boxes, window);
      if (coverage_bucket(coverage) != bucket) continue;
      out.samples.push_back({scene.image_id, {window, "bucket" + std::to_string(bucket)}, coverage, bucket});
      ++filled;
    }
    if (filled < n_per_bucket) out.unfillable.push_back(bucket);
  }
  return out;
}

std::vector<ClassifierCrop> make_classifier_crops(std::span<const Scene> scenes, int num_classes,
                                                  const ClassifierCropConfig& config) {
  if (!(0.0 <= config.neg_iou && config.neg_iou < config.pos_iou && config.pos_iou <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "classifier crops need 0 <= neg_iou < pos_iou <= 1");
  }
  constexpr int kAttempts = 200;
  std::vector<ClassifierCrop> crops;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const Scene& scene = scenes[s];
    Rng rng(mix_seed(config.seed ^ mix_seed(scene.image_id + 1)));
    const auto boxes = scene.boxes();
    int positives = 0;
    for (const auto& obj : scene.objects) {
      for (int p = 0; p < config.positives_per_object; ++p) {
        NormBox crop = obj.box;
        if (config.jitter > 0.0) {
          for (int attempt = 0; attempt < kAttempts; ++attempt) {
            const double jw = config.jitter * obj.box.width();
            const double jh = config.jitter * obj.box.height();
            NormBox cand = clip({obj.box.xmin + jw * rng.uniform(-1.0, 1.0),
                                 obj.box.ymin + jh * rng.uniform(-1.0, 1.0),
                                 obj.box.xmax + jw * rng.uniform(-1.0, 1.0),
                                 obj.box.ymax + jh * rng.uniform(-1.0, 1.0)});
            if (cand.xmin < cand.xmax && cand.ymin < cand.ymax &&
                jaccard(cand, obj.box) >= config.pos_iou) {
              crop = cand;
              break;
            }
          }
        }
        crops.push_back({s, crop, obj.class_label});
        ++positives;
      }
    }
    const int negatives = positives * config.negatives_per_positive;
    for (int n = 0; n < negatives; ++n) {
      for (int attempt = 0; attempt < kAttempts; ++attempt) {
        const double w = rng.uniform(0.1, 0.6);
        const double h = rng.uniform(0.1, 0.6);
        const double x = rng.uniform(0.0, 1.0 - w);
        const double y = rng.uniform(0.0, 1.0 - h);
        const NormBox cand{x, y, x + w, y + h};
        const bool clear = std::all_of(boxes.begin(), boxes.end(), [&](const NormBox& g) {
          return jaccard(cand, g) <= config.neg_iou;
        });
        if (clear) {
          crops.push_back({s, cand, num_classes});
          break;
        }
      }
    }
  }
  return crops;
}

std::vector<NormBox> boxes_in_window(const Scene& scene, const NormBox& window, double min_visible) {
  std::vector<NormBox> out;
  const CropWindow w{window, ""};
  for (const auto& o : scene.objects) {
    const NormBox visible = intersection(o.box, window);
    const double full = area(o.box);
    if (full <= 0.0 || area(visible) < min_visible * full || area(visible) <= 0.0) continue;
    out.push_back(clip(image_to_window(visible, w)));
  }
  return out;
}

std::vector<LocalizerExample> make_localizer_examples(std::span<const Scene> scenes,
                                                      const LocalizerSetConfig& config) {
  std::vector<LocalizerExample> out;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const Scene& scene = scenes[s];
    if (config.full_image) {
      const NormBox full{0.0, 0.0, 1.0, 1.0};
      out.push_back({s, {full, "full"}, boxes_in_window(scene, full, config.min_visible)});
    }
    if (config.crops_per_bucket > 0) {
      for (const auto& c : sample_crops_bucketed(scene, config.crops_per_bucket, config.seed).samples) {
        out.push_back({s, c.window, boxes_in_window(scene, c.window.box, config.min_visible)});
      }
    }
  }
  return out;
}

}  // namespace multibox
