#include <doctest.h>

#include <sstream>

#include "multibox/error.hpp"
#include "multibox/priors.hpp"
#include "oracles.hpp"

using namespace multibox;

TEST_CASE("k=1 gives the coordinate-wise mean") {
  const std::vector<NormBox> boxes{{0.1, 0.2, 0.3, 0.4}, {0.3, 0.2, 0.5, 0.8}, {0.2, 0.5, 0.4, 0.9}};
  const PriorSet p = fit_priors(boxes, 1, 42);
  REQUIRE(p.size() == 1);
  CHECK(p.priors[0].xmin == doctest::Approx(0.2));
  CHECK(p.priors[0].ymin == doctest::Approx(0.3));
  CHECK(p.priors[0].xmax == doctest::Approx(0.4));
  CHECK(p.priors[0].ymax == doctest::Approx(0.7));
}

TEST_CASE("two separated clusters") {
  std::vector<NormBox> boxes;
  Rng rng(4);
  for (int i = 0; i < 6; ++i) {
    boxes.push_back({0.1 + 0.01 * rng.uniform(), 0.1, 0.2, 0.2 + 0.01 * rng.uniform()});
    boxes.push_back({0.7, 0.7 + 0.01 * rng.uniform(), 0.9 + 0.01 * rng.uniform(), 0.9});
  }
  const PriorSet p = fit_priors(boxes, 2, 9);
  REQUIRE(p.size() == 2);
  NormBox m0{}, m1{};
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    NormBox& m = i % 2 == 0 ? m0 : m1;
    m.xmin += boxes[i].xmin / 6;
    m.ymin += boxes[i].ymin / 6;
    m.xmax += boxes[i].xmax / 6;
    m.ymax += boxes[i].ymax / 6;
  }
  for (int d = 0; d < 4; ++d) {
    CHECK(p.priors[0].coords()[d] == doctest::Approx(m0.coords()[d]).epsilon(1e-12));
    CHECK(p.priors[1].coords()[d] == doctest::Approx(m1.coords()[d]).epsilon(1e-12));
  }
  CHECK(std::abs(kmeans_objective(boxes, p.priors) - oracle::brute_force_kmeans(boxes, 2)) < 1e-9);
}

TEST_CASE("identical boxes collapse to duplicates") {
  const std::vector<NormBox> boxes(5, NormBox{0.2, 0.3, 0.6, 0.7});
  const PriorSet p = fit_priors(boxes, 3, 1);
  REQUIRE(p.size() == 3);
  for (const auto& prior : p.priors) CHECK(prior == boxes[0]);
}

TEST_CASE("too few boxes") {
  const std::vector<NormBox> boxes(2, NormBox{0.2, 0.3, 0.6, 0.7});
  try {
    fit_priors(boxes, 3, 1);
    FAIL("expected TooFewBoxes");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewBoxes);
  }
}

TEST_CASE("fit_priors is deterministic and canonically sorted") {
  Rng rng(12);
  std::vector<NormBox> boxes(200);
  for (auto& b : boxes) b = oracle::random_box(rng);
  const PriorSet a = fit_priors(boxes, 8, 5);
  const PriorSet b = fit_priors(boxes, 8, 5);
  CHECK(a.priors == b.priors);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a.priors[i - 1].coords() <= a.priors[i].coords());
  for (const auto& p : a.priors) CHECK(clip(p) == p);
}

TEST_CASE("objective never increases across Lloyd iterations") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<NormBox> boxes(30 + rng.below(100));
    for (auto& b : boxes) b = oracle::random_box(rng);
    const int k = 1 + static_cast<int>(rng.below(10));
    const auto trace = kmeans_trace(boxes, k, trial);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
  }
}

TEST_CASE("restarted k-means reaches the brute-force partition") {
  Rng rng(57);
  KMeansOptions opts;
  opts.restarts = 10;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(6));
    const int k = 1 + static_cast<int>(rng.below(3));
    std::vector<NormBox> boxes(n);
    for (auto& b : boxes) b = oracle::random_box(rng);
    const PriorSet p = fit_priors(boxes, k, trial, opts);
    CHECK(std::abs(kmeans_objective(boxes, p.priors) - oracle::brute_force_kmeans(boxes, k)) < 1e-9);
  }
}

TEST_CASE("residual encoding") {
  const NormBox prior{0, 0, 0.5, 0.5};
  const Vec4 r = encode_residual(prior, {0.1, 0.1, 0.6, 0.6});
  for (double v : r) CHECK(v == doctest::Approx(0.1).epsilon(1e-12));
  for (double v : encode_residual(prior, prior)) CHECK(v == 0.0);

  CHECK(decode(prior, {0, 0, 0, 0}) == prior);
  const NormBox d = decode({0.4, 0.4, 0.6, 0.6}, {-0.1, 0, 0.1, 0});
  CHECK(d.xmin == doctest::Approx(0.3));
  CHECK(d.ymin == doctest::Approx(0.4));
  CHECK(d.xmax == doctest::Approx(0.7));
  CHECK(d.ymax == doctest::Approx(0.6));
  CHECK(decode({0.5, 0.5, 0.9, 0.9}, {0, 0, 0.5, 0.5}).xmax == 1.0);
  // inverted corners are swapped back into order
  const NormBox swapped = decode({0.4, 0.4, 0.5, 0.5}, {0.3, 0, -0.3, 0});
  CHECK(swapped.xmin == doctest::Approx(0.2));
  CHECK(swapped.xmax == doctest::Approx(0.7));

  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const NormBox p = oracle::random_box(rng, 0.1, 0.4);
    const NormBox target = oracle::random_box(rng, 0.1, 0.4);
    const NormBox back = decode(p, encode_residual(p, target));
    for (int c = 0; c < 4; ++c) CHECK(back.coords()[c] == doctest::Approx(target.coords()[c]).epsilon(1e-12));
  }
}

TEST_CASE("priors file round trip is bit exact") {
  Rng rng(6);
  PriorSet p;
  p.seed = 1234;
  for (int i = 0; i < 7; ++i) p.priors.push_back(oracle::random_box(rng));
  p.priors.push_back({0.1, 1.0 / 3.0, 2.0 / 3.0, 1.0});
  std::stringstream ss;
  write_priors(ss, p);
  CHECK(ss.str().rfind("multibox-priors v1 k=8 seed=1234\n", 0) == 0);
  const PriorSet back = read_priors(ss);
  CHECK(back.priors == p.priors);
  CHECK(back.seed == 1234);

  std::stringstream bad("multibox-priors v1 k=3 seed=1\n0 0 1 1\n");
  CHECK_THROWS_AS(read_priors(bad), Error);
  std::stringstream junk("hello\n");
  CHECK_THROWS_AS(read_priors(junk), Error);
}
