#include <doctest.h>

#include "multibox/geometry.hpp"
#include "multibox/rng.hpp"
#include "oracles.hpp"

using namespace multibox;

TEST_CASE("area") {
  CHECK(area({0, 0, 1, 1}) == 1.0);
  CHECK(area({0.2, 0.2, 0.2, 0.9}) == 0.0);
  CHECK(area({0, 0, 0.5, 0.5}) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("jaccard fixtures") {
  const NormBox a{0.1, 0.2, 0.6, 0.7};
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard({0, 0, 0.2, 0.2}, {0.5, 0.5, 0.9, 0.9}) == 0.0);
  CHECK(jaccard({0, 0, 0.5, 0.5}, {0.25, 0.25, 0.75, 0.75}) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  // two degenerate boxes: defined as zero rather than NaN
  CHECK(jaccard({0.3, 0.3, 0.3, 0.3}, {0.3, 0.3, 0.3, 0.3}) == 0.0);
  // touching edges have zero intersection
  CHECK(jaccard({0, 0, 0.5, 1}, {0.5, 0, 1, 1}) == 0.0);
}

TEST_CASE("jaccard properties on random boxes") {
  Rng rng(11);
  for (int t = 0; t < 2000; ++t) {
    const NormBox a = oracle::random_box(rng, 0.0, 0.7);
    const NormBox b = oracle::random_box(rng, 0.0, 0.7);
    const double ab = jaccard(a, b);
    CHECK(ab == jaccard(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (area(a) > 0.0) CHECK(jaccard(a, a) == 1.0);
  }
}

TEST_CASE("clip") {
  CHECK(clip({-0.1, 0.2, 1.3, 0.8}) == NormBox{0, 0.2, 1, 0.8});
  CHECK(clip({0.1, 0.1, 0.9, 0.9}) == NormBox{0.1, 0.1, 0.9, 0.9});
  CHECK(clip({-2, -2, -1, -1}) == NormBox{0, 0, 0, 0});

  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    const double x0 = rng.uniform(-2, 2), y0 = rng.uniform(-2, 2);
    const NormBox b{x0, y0, x0 + rng.uniform(0, 2), y0 + rng.uniform(0, 2)};
    const NormBox c = clip(b);
    CHECK(clip(c) == c);
    CHECK(c.xmin <= c.xmax);
    CHECK(c.ymin <= c.ymax);
    for (double v : c.coords()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("window_to_image") {
  const CropWindow quarter{{0.25, 0.25, 0.75, 0.75}, "t"};
  CHECK(window_to_image({0, 0, 1, 1}, quarter) == NormBox{0.25, 0.25, 0.75, 0.75});
  CHECK(window_to_image({0.5, 0.5, 1, 1}, {{0, 0, 0.5, 0.5}, "t"}) == NormBox{0.25, 0.25, 0.5, 0.5});
  CHECK(window_to_image({0, 0, 1, 1}, {}) == NormBox{0, 0, 1, 1});
  // outside the window, truncated to the image
  CHECK(window_to_image({-1, -1, 2, 2}, quarter) == NormBox{0, 0, 1, 1});

  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const NormBox b{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)};
    CHECK(window_to_image(b, {}) == clip(b));
  }
}

TEST_CASE("image_to_window inverts window_to_image inside the window") {
  const CropWindow w{{0.2, 0.4, 0.8, 1.0}, "t"};
  const NormBox local{0.1, 0.2, 0.7, 0.9};
  const NormBox back = image_to_window(window_to_image(local, w), w);
  for (int d = 0; d < 4; ++d) CHECK(back.coords()[d] == doctest::Approx(local.coords()[d]).epsilon(1e-12));
}
