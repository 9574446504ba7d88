#pragma once

#include <array>
#include <string>

namespace multibox {

/// Axis-aligned box in normalized image coordinates. Closed intervals;
/// zero-area boxes are allowed.
struct NormBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const noexcept { return xmax - xmin; }
  double height() const noexcept { return ymax - ymin; }
  double center_x() const noexcept { return 0.5 * (xmin + xmax); }
  double center_y() const noexcept { return 0.5 * (ymin + ymax); }

  std::array<double, 4> coords() const noexcept { return {xmin, ymin, xmax, ymax}; }
  static NormBox from_coords(const std::array<double, 4>& c) noexcept {
    return {c[0], c[1], c[2], c[3]};
  }

  bool operator==(const NormBox&) const = default;
};

/// A square region of the full image fed to the localizer as one input.
struct CropWindow {
  NormBox box{0.0, 0.0, 1.0, 1.0};
  std::string scale_tag = "full";
};

double area(const NormBox& b) noexcept;

NormBox intersection(const NormBox& a, const NormBox& b) noexcept;

/// Intersection over union; 0 when the union has zero area.
double jaccard(const NormBox& a, const NormBox& b) noexcept;

/// Clamps every coordinate to [0,1]. Ordering is kept because clamping is
/// monotone.
NormBox clip(const NormBox& b) noexcept;

/// Maps a box given in window-local normalized coordinates into full-image
/// coordinates and clips it to the image.
NormBox window_to_image(const NormBox& local, const CropWindow& window) noexcept;

/// Inverse of window_to_image without clipping.
NormBox image_to_window(const NormBox& global, const CropWindow& window) noexcept;

/// Squared L2 distance between two boxes viewed as 4-vectors.
double squared_distance(const NormBox& a, const NormBox& b) noexcept;

}  // namespace multibox
