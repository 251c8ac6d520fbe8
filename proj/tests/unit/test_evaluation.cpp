#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/auc_oracle.hpp"
#include "adsm/ablation.hpp"
#include "adsm/errors.hpp"
#include "adsm/evaluation.hpp"

using namespace adsm;
using adsm::testing::pairwise_auc;

TEST_CASE("hand-computed AUC") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<std::uint8_t> y{0, 0, 1, 1};
  CHECK(roc_auc(s, y) == doctest::Approx(0.75));
}

TEST_CASE("ties count half") {
  const std::vector<double> s{0.5, 0.5, 0.5, 0.5};
  const std::vector<std::uint8_t> y{0, 1, 0, 1};
  CHECK(roc_auc(s, y) == 0.5);
  const std::vector<double> s2{0.2, 0.5, 0.5, 0.9};
  const std::vector<std::uint8_t> y2{0, 0, 1, 1};
  CHECK(roc_auc(s2, y2) == doctest::Approx(0.875));
}

TEST_CASE("AUC matches exhaustive pair counting") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 20) / 10.0;  // coarse grid forces ties
      y[i] = static_cast<std::uint8_t>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(std::abs(roc_auc(s, y) - pairwise_auc(s, y)) <= 1e-12);
  }
}

TEST_CASE("single-class labels are undefined") {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<std::uint8_t> y{0, 0};
  CHECK_THROWS_WITH_AS(roc_auc(s, y), doctest::Contains("single class"), DataError);
}

TEST_CASE("micro pools frames and macro averages videos") {
  std::vector<LabeledVideo> v{
      {"a", {0.1, 0.9, 0.2, 0.8}, {0, 1, 0, 1}},
      {"b", {0.5, 0.6, 0.7}, {1, 0, 0}},
      {"c", {0.3, 0.3}, {0, 0}},
  };
  std::vector<double> all;
  std::vector<std::uint8_t> labels;
  for (const auto& x : v) {
    all.insert(all.end(), x.scores.begin(), x.scores.end());
    labels.insert(labels.end(), x.labels.begin(), x.labels.end());
  }
  CHECK(micro_auc(v) == doctest::Approx(pairwise_auc(all, labels)).epsilon(1e-12));
  const MacroAuc m = macro_auc(v);
  CHECK(m.value == doctest::Approx((1.0 + 0.0) / 2));
  CHECK(m.evaluated == std::vector<std::string>{"a", "b"});
  CHECK(m.excluded == std::vector<std::string>{"c"});

  std::vector<LabeledVideo> normal_only{{"c", {0.3, 0.3}, {0, 0}}};
  CHECK_THROWS_AS(macro_auc(normal_only), DataError);
  CHECK_THROWS_AS(micro_auc(normal_only), DataError);
}

TEST_CASE("ablation variants follow the table order") {
  const auto v = ablation_variants();
  REQUIRE(v.size() == 6);
  CHECK(std::string(v[0].name) == "DSM");
  CHECK_FALSE(v[0].autoregressive);
  CHECK(std::string(v[5].name) == "All");
  CHECK((v[5].autoregressive && v[5].scene && v[5].motion && v[5].appearance));
  for (std::size_t i = 2; i < 5; ++i) CHECK((v[i].scene + v[i].motion + v[i].appearance) == 1);
}

TEST_CASE("ablation rows are derived from shared passes") {
  // A Gaussian oracle stands in for every checkpoint; missing ones report NA.
  VideoSequence a;
  a.video_id = "a";
  a.frames = Tensor(Shape{16, 8, 8, 1}, 0.5);
  for (std::size_t i = 8 * 64; i < 16 * 64; ++i) a.frames[i] = 0.9;
  a.frame_labels.assign(16, 0);
  for (std::size_t f = 8; f < 16; ++f) a.frame_labels[f] = 1;
  std::vector<VideoSequence> test{a};

  const GaussianScoreModel model(0.5, 0.01);
  ModelLookup lookup = [&](bool scene, bool motion) -> const ScoreModel* {
    return scene && motion ? nullptr : &model;
  };
  ScoreConfig cfg;
  cfg.levels = 3;
  cfg.clip_frames = 4;
  const auto rows = ablation_run(test, lookup, cfg, 4);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].present);
  CHECK(rows[0].micro_auc == doctest::Approx(1.0));
  CHECK_FALSE(rows[5].present);
  CHECK(std::isnan(rows[5].macro_auc));
}

TEST_CASE("labels are cut to the scored frames") {
  VideoScores vs;
  vs.video_id = "v";
  vs.covered = 3;
  const std::vector<std::uint8_t> labels{0, 1, 0, 1, 1};
  const LabeledVideo lv = label_indicator(vs, labels, {0.1, 0.2, 0.3});
  CHECK(lv.labels == std::vector<std::uint8_t>{0, 1, 0});
}
