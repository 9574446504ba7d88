#include "multibox/geometry.hpp"

#include <algorithm>

namespace multibox {

double area(const NormBox& b) noexcept {
  return std::max(0.0, b.width()) * std::max(0.0, b.height());
}

NormBox intersection(const NormBox& a, const NormBox& b) noexcept {
  NormBox r{std::max(a.xmin, b.xmin), std::max(a.ymin, b.ymin), std::min(a.xmax, b.xmax),
            std::min(a.ymax, b.ymax)};
  r.xmax = std::max(r.xmax, r.xmin);
  r.ymax = std::max(r.ymax, r.ymin);
  return r;
}

double jaccard(const NormBox& a, const NormBox& b) noexcept {
  const double iw = std::max(0.0, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
  const double ih = std::max(0.0, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
  const double inter = iw * ih;
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

NormBox clip(const NormBox& b) noexcept {
  auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {c(b.xmin), c(b.ymin), c(b.xmax), c(b.ymax)};
}

NormBox window_to_image(const NormBox& local, const CropWindow& window) noexcept {
  const NormBox& w = window.box;
  const double sx = w.width();
  const double sy = w.height();
  return clip({w.xmin + local.xmin * sx, w.ymin + local.ymin * sy, w.xmin + local.xmax * sx,
               w.ymin + local.ymax * sy});
}

NormBox image_to_window(const NormBox& global, const CropWindow& window) noexcept {
  const NormBox& w = window.box;
  const double sx = w.width() > 0.0 ? w.width() : 1.0;
  const double sy = w.height() > 0.0 ? w.height() : 1.0;
  return {(global.xmin - w.xmin) / sx, (global.ymin - w.ymin) / sy, (global.xmax - w.xmin) / sx,
          (global.ymax - w.ymin) / sy};
}

double squared_distance(const NormBox& a, const NormBox& b) noexcept {
  const double dx0 = a.xmin - b.xmin;
  const double dy0 = a.ymin - b.ymin;
  const double dx1 = a.xmax - b.xmax;
  const double dy1 = a.ymax - b.ymax;
  return dx0 * dx0 + dy0 * dy0 + dx1 * dx1 + dy1 * dy1;
}

}  // namespace multibox
