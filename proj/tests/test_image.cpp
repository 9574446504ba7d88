#include <doctest.h>

#include "multibox/error.hpp"
#include "multibox/image.hpp"

using namespace multibox;

namespace {

Image make(int w, int h, std::vector<std::uint8_t> px) { return Image{w, h, std::move(px)}; }

double input(double value, int size) { return (value / 255.0 - 0.5) / size; }

}  // namespace

TEST_CASE("uniform image maps to a constant input") {
  const Image img = make(4, 4, std::vector<std::uint8_t>(16, 51));
  for (int size : {1, 3, 8}) {
    for (double v : extract_crop(img, {0.1, 0.2, 0.7, 0.9}, size)) CHECK(v == doctest::Approx(input(51, size)));
  }
}

TEST_CASE("area averaging") {
  const Image img = make(2, 2, {0, 100, 200, 255});
  const auto one = extract_crop(img, {0, 0, 1, 1}, 1);
  CHECK(one[0] == doctest::Approx(input(138.75, 1)));

  const auto same = extract_crop(img, {0, 0, 1, 1}, 2);
  CHECK(same[0] == doctest::Approx(input(0, 2)));
  CHECK(same[1] == doctest::Approx(input(100, 2)));
  CHECK(same[2] == doctest::Approx(input(200, 2)));
  CHECK(same[3] == doctest::Approx(input(255, 2)));

  // left column only, then a window straddling both columns of the top row
  CHECK(extract_crop(img, {0, 0, 0.5, 1}, 1)[0] == doctest::Approx(input(100, 1)));
  CHECK(extract_crop(img, {0.25, 0, 0.75, 0.5}, 1)[0] == doctest::Approx(input(50, 1)));
}

TEST_CASE("upsampling repeats source pixels") {
  const Image img = make(2, 1, {10, 250});
  const auto out = extract_crop(img, {0, 0, 1, 1}, 4);
  REQUIRE(out.size() == 16);
  CHECK(out[0] == doctest::Approx(input(10, 4)));
  CHECK(out[1] == doctest::Approx(input(10, 4)));
  CHECK(out[2] == doctest::Approx(input(250, 4)));
  CHECK(out[15] == doctest::Approx(input(250, 4)));
}

TEST_CASE("windows outside the image are clipped") {
  const Image img = make(2, 2, {0, 100, 200, 255});
  CHECK(extract_crop(img, {-1, -1, 0.5, 0.5}, 1)[0] == doctest::Approx(input(0, 1)));
}

TEST_CASE("shape errors") {
  const Image img = make(2, 2, {0, 100, 200, 255});
  std::vector<double> out(3);
  CHECK_THROWS_AS(extract_crop(img, {0, 0, 1, 1}, 2, out), Error);
  const Image broken = make(3, 3, {1, 2});
  CHECK_THROWS_AS(extract_crop(broken, {0, 0, 1, 1}, 2), Error);
}
