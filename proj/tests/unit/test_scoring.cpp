#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../support/tempdir.hpp"
#include "adsm/errors.hpp"
#include "adsm/scoring.hpp"

using namespace adsm;
using adsm::testing::TempDir;

namespace {

Tensor clean_window(std::uint64_t seed, Shape shape = {8, 8, 8, 3}) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

VideoSequence make_video(std::size_t frames, std::uint64_t seed) {
  VideoSequence v;
  v.video_id = "vid" + std::to_string(seed);
  v.frames = clean_window(seed, {frames, 8, 8, 3});
  return v;
}

}  // namespace

TEST_CASE("the analytic target denoises exactly at every level") {
  const Tensor x = clean_window(1);
  const GaussianScoreModel oracle(x, 0.0);
  Rng rng(2);
  for (double sigma : build_noise_schedule(0.001, 1.0, 20).levels) {
    const Perturbation p = perturb(x, sigma, rng);
    CHECK(max_abs_diff(denoise_step(p.noisy, sigma, oracle, 0), x) <= 1e-6);
  }
}

TEST_CASE("psnr of known errors") {
  const Tensor a(Shape{4}, 0.5);
  CHECK(psnr(a, a) == doctest::Approx(100.0));
  const Tensor b(Shape{4}, 0.6);
  CHECK(psnr(a, b) == doctest::Approx(20.0));
  CHECK(psnr(a, b, 255.0) == doctest::Approx(20.0 + 20.0 * std::log10(255.0)));
  CHECK_THROWS_AS(psnr(a, Tensor(Shape{3})), ContractViolation);
}

TEST_CASE("with a zero score the ladder accumulates noise variance") {
  const Tensor x = clean_window(3);
  const ZeroScoreModel zero;
  const auto levels = build_noise_schedule(0.001, 1.0, 20).levels;
  ScoreConfig cfg;
  std::vector<double> mean_sq(levels.size(), 0.0);
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(100 + s);
    const LevelScores ls = autoregressive_score(x, zero, levels, 0, rng, cfg);
    for (std::size_t i = 0; i < levels.size(); ++i)
      mean_sq[i] += ls.drift[i] * ls.drift[i] / static_cast<double>(x.size()) / seeds;
  }
  double cum = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    cum += levels[i] * levels[i];
    CHECK(std::abs(mean_sq[i] / cum - 1.0) < 0.1);
  }
}

TEST_CASE("the non-autoregressive ablation restarts from the clean window") {
  const Tensor x = clean_window(4);
  const ZeroScoreModel zero;
  const std::vector<double> levels{0.1, 0.5};
  ScoreConfig cfg;
  cfg.autoregressive = false;
  Rng rng(5);
  const LevelScores ls = autoregressive_score(x, zero, levels, 0, rng, cfg);
  const double d = static_cast<double>(x.size());
  CHECK(ls.drift[1] * ls.drift[1] / d == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("shared noise adds the levels coherently") {
  const Tensor x = clean_window(4);
  const ZeroScoreModel zero;
  const std::vector<double> levels{0.1, 0.2, 0.4};
  ScoreConfig cfg;
  cfg.reuse_noise = true;
  Rng rng(6);
  const LevelScores ls = autoregressive_score(x, zero, levels, 0, rng, cfg);
  CHECK(ls.drift[2] == doctest::Approx(ls.drift[0] * 7.0).epsilon(1e-12));
}

TEST_CASE("score norm and appearance fusion") {
  const Tensor x = clean_window(7);
  const GaussianScoreModel g(0.5, 0.04);
  const std::vector<double> levels{0.05, 0.1};
  ScoreConfig cfg;
  Rng rng(8);
  const LevelScores ls = autoregressive_score(x, g, levels, 0, rng, cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(ls.scores[i] == doctest::Approx(ls.norm[i] / ls.psnr[i]));
    CHECK(ls.norm[i] > 0.0);
  }
  CHECK(ls.combined(false) == ls.norm);
  CHECK(ls.combined(true) == ls.scores);
}

TEST_CASE("patch-mean norm averages per-patch norms") {
  const Tensor x(Shape{1, 4, 4, 1}, 0.0);
  Tensor mean(Shape{1, 4, 4, 1}, 0.0);
  mean[0] = -2.0;  // only the first 2x2 patch gets a score
  const GaussianScoreModel g(mean, 1.0);
  ScoreConfig cfg;
  cfg.norm = NormMode::patch_mean;
  cfg.patch = 2;
  cfg.reuse_noise = true;
  const std::vector<double> levels{1e-9};
  Rng rng(1);
  const LevelScores ls = autoregressive_score(x, g, levels, 0, rng, cfg);
  CHECK(ls.norm[0] == doctest::Approx(2.0 / 4).epsilon(1e-6));
}

TEST_CASE("levels must ascend") {
  const Tensor x = clean_window(1);
  const ZeroScoreModel zero;
  ScoreConfig cfg;
  Rng rng(1);
  const std::vector<double> bad{0.2, 0.1};
  CHECK_THROWS_AS(autoregressive_score(x, zero, bad, 0, rng, cfg), ContractViolation);
}

TEST_CASE("clip max aggregation") {
  const std::vector<double> s{0.2, 0.9, 0.4};
  const std::vector<std::size_t> same_clip{0, 8, 16};
  CHECK(clip_max_aggregate(s, same_clip, 24, 24) == std::vector<double>{0.9});
  const std::vector<std::size_t> one_each{0, 8, 16};
  CHECK(clip_max_aggregate(s, one_each, 24, 8) == s);
  const std::vector<double> flat{0.5, 0.5};
  const std::vector<std::size_t> st{0, 8};
  CHECK(clip_max_aggregate(flat, st, 16, 16) == std::vector<double>{0.5});

  // clip 1 has no window start and inherits clip 0; a leading gap is 0
  const std::vector<double> two{0.3, 0.7};
  const std::vector<std::size_t> gap{0, 16};
  CHECK(clip_max_aggregate(two, gap, 24, 8) == std::vector<double>{0.3, 0.3, 0.7});
  const std::vector<double> one{0.6};
  const std::vector<std::size_t> late{8};
  CHECK(clip_max_aggregate(one, late, 16, 8) == std::vector<double>{0.0, 0.6});
  CHECK(expand_clips(std::vector<double>{1, 2}, 5, 3) == std::vector<double>{1, 1, 1, 2, 2});
}

TEST_CASE("normalization maps to the unit interval") {
  const auto n = normalize_scores(std::vector<double>{2, 4, 3});
  CHECK(n == std::vector<double>{0.0, 1.0, 0.5});
  CHECK(normalize_scores(std::vector<double>{7, 7}) == std::vector<double>{0, 0});
}

TEST_CASE("level fusion weights") {
  const std::vector<std::vector<double>> levels{{0.0, 1.0}, {1.0, 1.0}};
  CHECK(fuse_levels(levels, {}) == std::vector<double>{0.5, 1.0});
  CHECK(fuse_levels(levels, std::vector<double>{0.25, 0.75}) == std::vector<double>{0.75, 1.0});
  CHECK_THROWS_AS(fuse_levels(levels, std::vector<double>{0.5, 0.6}), ContractViolation);
  CHECK_THROWS_AS(fuse_levels(levels, std::vector<double>{1.5, -0.5}), ContractViolation);
}

TEST_CASE("video scoring covers whole windows and stays in range") {
  const VideoSequence v = make_video(20, 2);
  const GaussianScoreModel g(0.5, 0.08);
  ScoreConfig cfg;
  cfg.levels = 5;
  const VideoScores a = score_video(v, g, cfg, 4);
  CHECK(a.starts == std::vector<std::size_t>{0, 4, 8, 12, 16});
  CHECK(a.covered == 20);
  CHECK(a.indicator.size() == 20);
  for (double x : a.indicator) CHECK((x >= 0.0 && x <= 1.0));
  const VideoScores b = score_video(v, g, cfg, 4);
  CHECK(a.indicator == b.indicator);
  cfg.seed = 1;
  CHECK_FALSE(score_video(v, g, cfg, 4).windows[0].scores == a.windows[0].scores);
}

TEST_CASE("schedules change raw scores") {
  const VideoSequence v = make_video(8, 3);
  const GaussianScoreModel g(0.5, 0.08);
  ScoreConfig geo;
  geo.levels = 4;
  ScoreConfig lin = geo;
  lin.schedule = ScheduleMode::linear;
  CHECK_FALSE(score_video(v, g, geo, 4).windows[0].scores == score_video(v, g, lin, 4).windows[0].scores);
}

TEST_CASE("short videos are rejected") {
  const VideoSequence v = make_video(3, 1);
  const ZeroScoreModel zero;
  CHECK_THROWS_WITH_AS(score_video(v, zero, ScoreConfig{}, 8), doctest::Contains("video too short"), DataError);
}

TEST_CASE("score files round trip") {
  TempDir dir;
  const GaussianScoreModel g(0.5, 0.08);
  ScoreConfig cfg;
  cfg.levels = 3;
  std::vector<VideoScores> vs{score_video(make_video(8, 1), g, cfg, 4), score_video(make_video(12, 2), g, cfg, 4)};
  write_raw_scores(dir / "raw.csv", vs);
  write_final_scores(dir / "final.csv", vs);
  const auto back = read_final_scores(dir / "final.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].video_id == "vid2");
  REQUIRE(back[1].indicator.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(back[1].indicator[i] == doctest::Approx(vs[1].indicator[i]).epsilon(1e-8));
}
