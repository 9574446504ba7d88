#include <doctest.h>

#include <sstream>

#include "multibox/datagen.hpp"
#include "multibox/postprocess.hpp"
#include "oracles.hpp"

using namespace multibox;

namespace {

Detection det(NormBox b, double conf) {
  Detection d;
  d.box = b;
  d.localizer_conf = conf;
  return d;
}

std::vector<Detection> random_dets(Rng& rng, int n) {
  std::vector<Detection> out;
  for (int i = 0; i < n; ++i) {
    // coarse confidences so that ties occur
    out.push_back(det(oracle::random_box(rng, 0.05, 0.5), std::round(rng.uniform() * 20) / 20));
  }
  return out;
}

}  // namespace

TEST_CASE("nms fixtures") {
  const NormBox b{0.1, 0.1, 0.5, 0.5};
  const std::vector<Detection> same{det(b, 0.8), det(b, 0.9)};
  const auto kept = nms(same, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].localizer_conf == 0.9);

  const std::vector<Detection> apart{det({0, 0, 0.1, 0.1}, 0.2), det({0.5, 0.5, 0.6, 0.6}, 0.7),
                                     det({0.8, 0.8, 0.9, 0.9}, 0.4)};
  const auto all = nms(apart, 0.5);
  REQUIRE(all.size() == 3);
  CHECK(all[0].localizer_conf == 0.7);
  CHECK(all[1].localizer_conf == 0.4);
  CHECK(all[2].localizer_conf == 0.2);

  // Greedy chain: IoU(A,B) = IoU(B,C) = 0.6 and IoU(A,C) = 1/3. B goes, C
  // survives because its only strong overlap was already suppressed.
  const Detection a = det({0.0, 0, 0.4, 0.1}, 0.9);
  const Detection bb = det({0.1, 0, 0.5, 0.1}, 0.8);
  const Detection c = det({0.2, 0, 0.6, 0.1}, 0.7);
  REQUIRE(jaccard(a.box, bb.box) == doctest::Approx(0.6));
  REQUIRE(jaccard(bb.box, c.box) == doctest::Approx(0.6));
  const std::vector<Detection> chain{c, a, bb};
  const auto chained = nms(chain, 0.5);
  REQUIRE(chained.size() == 2);
  CHECK(chained[0].box == a.box);
  CHECK(chained[1].box == c.box);
}

TEST_CASE("nms at exactly the threshold suppresses") {
  const std::vector<Detection> d{det({0, 0, 0.4, 0.1}, 0.9), det({0.1, 0, 0.5, 0.1}, 0.8)};
  CHECK(nms(d, 0.6).size() == 1);
  CHECK(nms(d, 0.6000001).size() == 2);
}

TEST_CASE("nms ties keep input order") {
  const std::vector<Detection> d{det({0, 0, 0.2, 0.2}, 0.5), det({0.5, 0.5, 0.7, 0.7}, 0.5)};
  const auto kept = nms(d, 0.5);
  CHECK(kept[0].box == d[0].box);
  CHECK(kept[1].box == d[1].box);
}

TEST_CASE("nms properties on random sets") {
  Rng rng(10);
  for (int trial = 0; trial < 300; ++trial) {
    const auto dets = random_dets(rng, 1 + static_cast<int>(rng.below(30)));
    const double t = rng.uniform();
    const auto once = nms(dets, t);
    const auto twice = nms(once, t);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].box == twice[i].box);
    for (std::size_t i = 1; i < once.size(); ++i) CHECK(once[i - 1].localizer_conf >= once[i].localizer_conf);

    CHECK(nms(dets, 1.0).size() == dets.size());
    const auto strict = nms(dets, 0.0);
    for (std::size_t i = 0; i < strict.size(); ++i) {
      for (std::size_t j = i + 1; j < strict.size(); ++j) CHECK(jaccard(strict[i].box, strict[j].box) == 0.0);
    }
  }
}

TEST_CASE("crop windows") {
  const auto single = crop_windows(CropStrategy::max_center);
  REQUIRE(single.size() == 1);
  CHECK(single[0].box == NormBox{0, 0, 1, 1});

  const auto two = crop_windows(CropStrategy::two_scale);
  REQUIRE(two.size() == 10);
  CHECK(two[0].box == NormBox{0, 0, 1, 1});
  std::vector<std::pair<double, double>> origins;
  for (std::size_t i = 1; i < two.size(); ++i) {
    const NormBox& b = two[i].box;
    CHECK(b.width() == doctest::Approx(0.6));
    CHECK(b.height() == doctest::Approx(0.6));
    origins.emplace_back(b.xmin, b.ymin);
  }
  for (double oy : {0.0, 0.2, 0.4}) {
    for (double ox : {0.0, 0.2, 0.4}) {
      CHECK(std::find(origins.begin(), origins.end(), std::make_pair(ox, oy)) != origins.end());
    }
  }
  for (const auto& w : two) CHECK(clip(w.box) == w.box);

  // landscape image: centred square in normalized coordinates
  const auto wide = crop_windows(CropStrategy::max_center, 100, 50);
  CHECK(wide[0].box.xmin == doctest::Approx(0.25));
  CHECK(wide[0].box.xmax == doctest::Approx(0.75));
  CHECK(wide[0].box.ymin == 0.0);
  CHECK(wide[0].box.ymax == 1.0);
}

TEST_CASE("localize_image counts and bounds") {
  SceneConfig sc;
  sc.n_scenes = 3;
  sc.seed = 4;
  const auto scenes = generate_scenes(sc);
  const LocalizerTopology t{32, 16, 16, 6};
  const ModelParams params = ModelParams::init(t, 3);
  Rng rng(3);
  PriorSet priors;
  for (int i = 0; i < 6; ++i) priors.priors.push_back(oracle::random_box(rng));

  for (const auto& s : scenes) {
    CHECK(raw_detections(params, priors, s.image, CropStrategy::max_center).size() == 6);
    CHECK(raw_detections(params, priors, s.image, CropStrategy::two_scale).size() == 60);
    LocalizeOptions o;
    o.top_n = 0;
    CHECK(localize_image(params, priors, s.image, o).empty());
    for (auto strategy : {CropStrategy::max_center, CropStrategy::two_scale}) {
      for (int top : {1, 3, 10}) {
        o.strategy = strategy;
        o.top_n = top;
        const auto dets = localize_image(params, priors, s.image, o);
        CHECK(dets.size() <= static_cast<std::size_t>(top));
        for (const auto& d : dets) {
          CHECK(clip(d.box) == d.box);
          CHECK(d.localizer_conf > 0.0);
          CHECK(d.localizer_conf < 1.0);
        }
      }
    }
  }
}

TEST_CASE("score_detections") {
  SceneConfig sc;
  sc.n_scenes = 1;
  sc.seed = 2;
  const Scene scene = generate_scenes(sc)[0];
  ClassifierParams uniform = ClassifierParams::init({32, 8, 8, 3}, 1);
  uniform.out = Dense::zeros(4, 8);
  std::vector<Detection> dets{det({0.1, 0.1, 0.4, 0.3}, 0.8), det({0.5, 0.2, 0.9, 0.9}, 0.4)};
  const auto scored = score_detections(dets, uniform, scene.image);
  REQUIRE(scored.size() == 2);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    CHECK(*scored[i].class_score == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(*scored[i].combined_score == doctest::Approx(dets[i].localizer_conf * 0.25).epsilon(1e-12));
  }

  // classifier that always says background drops everything
  ClassifierParams bg = uniform;
  bg.out.bias(3) = 5.0;
  CHECK(score_detections(dets, bg, scene.image).empty());

  ClassifierParams any = ClassifierParams::init({32, 8, 8, 3}, 5);
  for (const auto& d : score_detections(dets, any, scene.image)) {
    CHECK(std::abs(*d.combined_score - d.localizer_conf * *d.class_score) <= 1e-12);
    CHECK(*d.class_label >= 0);
    CHECK(*d.class_label < 3);
  }
}

TEST_CASE("context squares") {
  const NormBox b{0.2, 0.3, 0.4, 0.7};
  const NormBox big = context_square(b, SquareContext::maximum);
  CHECK(big.width() == doctest::Approx(0.4));
  CHECK(big.height() == doctest::Approx(0.4));
  CHECK(big.center_x() == doctest::Approx(0.3));
  const NormBox small = context_square(b, SquareContext::minimum);
  CHECK(small.width() == doctest::Approx(0.2));
  CHECK(small.height() == doctest::Approx(0.2));
  CHECK(context_square({0.0, 0.0, 0.1, 0.5}, SquareContext::maximum).xmin == 0.0);
}

TEST_CASE("detections file round trip") {
  Detection a = det({0.1, 0.2, 0.3, 0.4}, 0.75);
  Detection b = det({0.5, 0.5, 1.0 / 3.0, 0.9}, 0.125);
  b.class_label = 2;
  b.class_score = 0.5;
  b.combined_score = 0.0625;
  const std::vector<DetectionRecord> recs{{3, a}, {17, b}};
  std::stringstream ss;
  write_detections(ss, recs);
  const std::string text = ss.str();
  CHECK(text.rfind("3 -1 0.75 0.75 ", 0) == 0);
  const auto back = read_detections(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].image_id == 3);
  CHECK(!back[0].detection.class_label);
  CHECK(back[1].detection.box == b.box);
  CHECK(*back[1].detection.class_label == 2);
  CHECK(*back[1].detection.combined_score == 0.0625);

  std::stringstream bad("1 2 3\n");
  CHECK_THROWS(read_detections(bad));
}
