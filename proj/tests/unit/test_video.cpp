#include <doctest.h>

#include <cmath>
#include <numeric>

#include "adsm/errors.hpp"
#include "adsm/video.hpp"

using namespace adsm;

namespace {

Tensor ramp(Shape shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i % 251) / 250.0;
  return t;
}

}  // namespace

TEST_CASE("patchify at the reference geometry gives 800 tokens") {
  const Tensor frames(Shape{8, 160, 160, 3}, 0.5);
  const TokenBatch b = patchify(frames, 16);
  CHECK(b.count() == 800);
  CHECK(b.tokens.shape() == Shape{800, 16 * 16 * 3});
}

TEST_CASE("patch tokens hold the pixels of their patch") {
  const Tensor frames = ramp({2, 4, 6, 2});
  const TokenBatch b = patchify(frames, 2);
  REQUIRE(b.count() == 2 * 2 * 3);
  // token for frame 1, row 1, col 2 starts at pixel (1, 2, 4)
  const std::size_t t = (1 * 2 + 1) * 3 + 2;
  CHECK(b.positions[t].frame == 1);
  CHECK(b.positions[t].row == 1);
  CHECK(b.positions[t].col == 2);
  auto px = [&](std::size_t f, std::size_t y, std::size_t x, std::size_t c) {
    return frames[((f * 4 + y) * 6 + x) * 2 + c];
  };
  CHECK(b.tokens[t * 8 + 0] == px(1, 2, 4, 0));
  CHECK(b.tokens[t * 8 + 3] == px(1, 2, 5, 1));
  CHECK(b.tokens[t * 8 + 4] == px(1, 3, 4, 0));
}

TEST_CASE("unpatchify inverts patchify") {
  const Tensor frames = ramp({3, 8, 8, 3});
  CHECK(unpatchify(patchify(frames, 4), 8, 8) == frames);
  CHECK_THROWS_AS(patchify(frames, 3), ContractViolation);
}

TEST_CASE("geometric ladder has constant log spacing") {
  const NoiseSchedule s = build_noise_schedule(0.001, 1.0, 20);
  REQUIRE(s.size() == 20);
  CHECK(s.levels.front() == 0.001);
  CHECK(s.levels.back() == 1.0);
  const double step = std::log(s.levels[1]) - std::log(s.levels[0]);
  CHECK(step == doctest::Approx(std::log(1000.0) / 19));
  for (std::size_t i = 1; i < s.size(); ++i)
    CHECK(std::abs(std::log(s.levels[i]) - std::log(s.levels[i - 1]) - step) <= 1e-12);
  CHECK(build_noise_schedule(0.1, 1.0, 1).levels == std::vector<double>{1.0});
  CHECK_THROWS_AS(build_noise_schedule(1.0, 0.1, 5), ContractViolation);
}

TEST_CASE("linear ladder has constant spacing") {
  const NoiseSchedule s = build_linear_schedule(0.1, 1.0, 10);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s.levels[i] - s.levels[i - 1] == doctest::Approx(0.1));
}

TEST_CASE("log-uniform samples stay in bounds and spread evenly in log space") {
  Rng rng(3);
  int low = 0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const double s = sample_sigma_loguniform(0.001, 1.0, rng);
    REQUIRE(s >= 0.001);
    REQUIRE(s <= 1.0);
    if (s < std::sqrt(0.001)) ++low;
  }
  CHECK(std::abs(static_cast<double>(low) / draws - 0.5) < 0.02);
}

TEST_CASE("derived streams are reproducible and distinct") {
  Rng a = derive_rng(5, {1, 2});
  Rng b = derive_rng(5, {1, 2});
  Rng c = derive_rng(5, {2, 1});
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
}

TEST_CASE("perturbation adds scaled unit noise") {
  Rng rng(1);
  const Tensor x(Shape{1000}, 0.25);
  const Perturbation p = perturb(x, 0.5, rng);
  double mean = 0, var = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(p.noisy[i] == doctest::Approx(0.25 + 0.5 * p.noise[i]));
    mean += p.noise[i] / 1000;
  }
  for (std::size_t i = 0; i < x.size(); ++i) var += (p.noise[i] - mean) * (p.noise[i] - mean) / 999;
  CHECK(std::abs(mean) < 0.15);
  CHECK(std::abs(var - 1.0) < 0.15);
}

TEST_CASE("motion weights follow the key-frame difference") {
  Tensor frames(Shape{4, 4, 4, 1}, 0.0);
  // Top-left patch changes by 0.6 at one pixel, bottom-right by 0.2.
  frames[((3 * 4 + 0) * 4 + 1)] = 0.6;
  frames[((3 * 4 + 3) * 4 + 3)] = 0.2;
  frames[((1 * 4 + 3) * 4 + 0)] = 0.9;  // middle frames do not count
  const MotionWeights w = motion_weights(frames, 2);
  REQUIRE(w.weights.size() == 16);
  CHECK_FALSE(w.uniform_fallback);
  CHECK(w.magnitudes == std::vector<double>{0.6, 0.0, 0.0, 0.2});
  CHECK(std::accumulate(w.weights.begin(), w.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t f = 0; f < 4; ++f) {
    CHECK(w.weights[f * 4 + 0] == doctest::Approx(0.75 / 4));
    CHECK(w.weights[f * 4 + 3] == doctest::Approx(0.25 / 4));
    CHECK(w.weights[f * 4 + 1] == 0.0);
  }
}

TEST_CASE("static clips fall back to uniform weights") {
  const Tensor frames(Shape{8, 8, 8, 3}, 0.3);
  const MotionWeights w = motion_weights(frames, 4);
  CHECK(w.uniform_fallback);
  for (double v : w.weights) CHECK(v == doctest::Approx(1.0 / 32));
}

TEST_CASE("motion weights always sum to one") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor frames = standard_normal({8, 16, 16, 3}, rng);
    const MotionWeights w = motion_weights(frames, 8);
    CHECK(std::abs(std::accumulate(w.weights.begin(), w.weights.end(), 0.0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("windows tile the video and drop the tail") {
  CHECK(window_starts(20, 8) == std::vector<std::size_t>{0, 8});
  CHECK(window_starts(7, 8).empty());
  const Tensor frames = ramp({10, 2, 2, 1});
  const Tensor w = extract_window(frames, 3, 4);
  CHECK(w.shape() == Shape{4, 2, 2, 1});
  CHECK(w[0] == frames[12]);
  CHECK_THROWS_AS(extract_window(frames, 8, 4), ContractViolation);
}
