#include "multibox/image.hpp"

#include <algorithm>
#include <cmath>

#include "multibox/error.hpp"

namespace multibox {

namespace {

struct Tap {
  int pixel;
  double weight;
};

// Area weights of source pixels for each of `size` output cells spanning
// [lo, hi) in pixel units.
std::vector<std::vector<Tap>> axis_taps(double lo, double hi, int extent, int size) {
  std::vector<std::vector<Tap>> taps(size);
  const double step = (hi - lo) / size;
  for (int u = 0; u < size; ++u) {
    const double a = lo + u * step;
    const double b = lo + (u + 1) * step;
    auto& t = taps[u];
    if (b - a <= 1e-12) {
      const int p = std::clamp(static_cast<int>(std::floor(a)), 0, extent - 1);
      t.push_back({p, 1.0});
      continue;
    }
    const int first = std::clamp(static_cast<int>(std::floor(a)), 0, extent - 1);
    const int last = std::clamp(static_cast<int>(std::ceil(b)) - 1, 0, extent - 1);
    double total = 0.0;
    for (int p = first; p <= last; ++p) {
      const double w = std::min(b, p + 1.0) - std::max(a, static_cast<double>(p));
      if (w > 0.0) {
        t.push_back({p, w});
        total += w;
      }
    }
    if (t.empty()) {
      t.push_back({first, 1.0});
      total = 1.0;
    }
    for (auto& tap : t) tap.weight /= total;
  }
  return taps;
}

}  // namespace

void extract_crop(const Image& image, const NormBox& window, int size, std::span<double> out) {
  if (size <= 0 || out.size() != static_cast<std::size_t>(size) * size) {
    throw Error(ErrorCode::ShapeMismatch, "crop output buffer has the wrong size");
  }
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw Error(ErrorCode::ShapeMismatch, "image raster does not match its dimensions");
  }
  const NormBox w = clip(window);
  const auto xt = axis_taps(w.xmin * image.width, w.xmax * image.width, image.width, size);
  const auto yt = axis_taps(w.ymin * image.height, w.ymax * image.height, image.height, size);

  const double scale = 1.0 / (255.0 * size);
  std::vector<double> row(image.width);
  for (int v = 0; v < size; ++v) {
    std::fill(row.begin(), row.end(), 0.0);
    for (const Tap& ty : yt[v]) {
      const std::uint8_t* src = image.pixels.data() + static_cast<std::size_t>(ty.pixel) * image.width;
      for (int x = 0; x < image.width; ++x) row[x] += ty.weight * src[x];
    }
    for (int u = 0; u < size; ++u) {
      double acc = 0.0;
      for (const Tap& tx : xt[u]) acc += tx.weight * row[tx.pixel];
      out[static_cast<std::size_t>(v) * size + u] = acc * scale - 0.5 / size;
    }
  }
}

std::vector<double> extract_crop(const Image& image, const NormBox& window, int size) {
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  extract_crop(image, window, size, out);
  return out;
}

}  // namespace multibox
