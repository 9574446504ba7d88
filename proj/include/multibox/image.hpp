#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "multibox/geometry.hpp"

namespace multibox {

/// 8-bit grayscale raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const Image&) const = default;
};

/// Resamples the region `window` (normalized image coordinates) to a
/// size x size grid by area averaging and writes size*size network inputs,
/// each pixel mapped to (value/255 - 0.5) / size, into `out`. The 1/size
/// factor keeps the input norm independent of the crop resolution.
void extract_crop(const Image& image, const NormBox& window, int size, std::span<double> out);

std::vector<double> extract_crop(const Image& image, const NormBox& window, int size);

}  // namespace multibox
