#include "adsm/video.hpp"

#include <algorithm>
#include <cmath>

#include "adsm/errors.hpp"

namespace adsm {

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

namespace {

void check_frames(const Tensor& frames, const char* who) {
  ADSM_REQUIRE(frames.rank() == 4,
               std::string(who) + ": frames must be [n,H,W,c], got " + shape_str(frames.shape()));
}

}  // namespace

TokenBatch patchify(const Tensor& frames, std::size_t patch) {
  check_frames(frames, "patchify");
  const std::size_t n = frames.dim(0), h = frames.dim(1), w = frames.dim(2), c = frames.dim(3);
  ADSM_REQUIRE(patch > 0 && h % patch == 0 && w % patch == 0,
               "patchify: frame " + std::to_string(h) + "x" + std::to_string(w) +
                   " is not divisible by patch size " + std::to_string(patch));
  const std::size_t rows = h / patch, cols = w / patch, dim = patch * patch * c;
  TokenBatch out;
  out.patch = patch;
  out.channels = c;
  out.tokens = Tensor(Shape{n * rows * cols, dim});
  out.positions.reserve(n * rows * cols);
  const double* src = frames.data().data();
  double* dst = out.tokens.data().data();
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t q = 0; q < cols; ++q) {
        out.positions.push_back({f, r, q});
        for (std::size_t dy = 0; dy < patch; ++dy) {
          const double* line = src + ((f * h + r * patch + dy) * w + q * patch) * c;
          std::copy_n(line, patch * c, dst);
          dst += patch * c;
        }
      }
  return out;
}

Tensor unpatchify(const TokenBatch& batch, std::size_t height, std::size_t width) {
  const std::size_t d = batch.patch, c = batch.channels;
  ADSM_REQUIRE(d > 0 && height % d == 0 && width % d == 0,
               "unpatchify: frame size not divisible by patch size");
  ADSM_REQUIRE(batch.tokens.rank() == 2 && batch.tokens.dim(0) == batch.count() &&
                   batch.tokens.dim(1) == d * d * c,
               "unpatchify: token tensor " + shape_str(batch.tokens.shape()) +
                   " inconsistent with positions/patch geometry");
  const std::size_t rows = height / d, cols = width / d, per_frame = rows * cols;
  ADSM_REQUIRE(batch.count() > 0 && batch.count() % per_frame == 0,
               "unpatchify: token count " + std::to_string(batch.count()) +
                   " is not a whole number of frames");
  const std::size_t n = batch.count() / per_frame;
  Tensor out(Shape{n, height, width, c});
  std::vector<bool> seen(batch.count(), false);
  const double* src = batch.tokens.data().data();
  for (std::size_t t = 0; t < batch.count(); ++t) {
    const TokenPosition& p = batch.positions[t];
    ADSM_REQUIRE(p.frame < n && p.row < rows && p.col < cols,
                 "unpatchify: token position out of range");
    const std::size_t slot = (p.frame * rows + p.row) * cols + p.col;
    ADSM_REQUIRE(!seen[slot], "unpatchify: duplicate token position");
    seen[slot] = true;
    const double* tok = src + t * d * d * c;
    for (std::size_t dy = 0; dy < d; ++dy)
      std::copy_n(tok + dy * d * c, d * c,
                  out.data().data() + ((p.frame * height + p.row * d + dy) * width + p.col * d) * c);
  }
  return out;
}

double NoiseSchedule::ratio() const {
  if (levels.size() < 2) return 1.0;
  return levels[1] / levels[0];
}

NoiseSchedule build_noise_schedule(double sigma_min, double sigma_max, std::size_t levels) {
  ADSM_REQUIRE(sigma_min > 0.0 && sigma_max > sigma_min,
               "noise schedule needs 0 < sigma_min < sigma_max");
  ADSM_REQUIRE(levels >= 1, "noise schedule needs at least one level");
  NoiseSchedule s{{}, sigma_min, sigma_max, ScheduleMode::geometric};
  if (levels == 1) {
    s.levels = {sigma_max};
    return s;
  }
  const double log_min = std::log(sigma_min);
  const double step = (std::log(sigma_max) - log_min) / static_cast<double>(levels - 1);
  for (std::size_t i = 0; i < levels; ++i)
    s.levels.push_back(std::exp(log_min + step * static_cast<double>(i)));
  s.levels.front() = sigma_min;
  s.levels.back() = sigma_max;
  return s;
}

NoiseSchedule build_linear_schedule(double sigma_min, double sigma_max, std::size_t levels) {
  ADSM_REQUIRE(sigma_min > 0.0 && sigma_max > sigma_min,
               "noise schedule needs 0 < sigma_min < sigma_max");
  ADSM_REQUIRE(levels >= 1, "noise schedule needs at least one level");
  NoiseSchedule s{{}, sigma_min, sigma_max, ScheduleMode::linear};
  if (levels == 1) {
    s.levels = {sigma_max};
    return s;
  }
  const double step = (sigma_max - sigma_min) / static_cast<double>(levels - 1);
  for (std::size_t i = 0; i < levels; ++i)
    s.levels.push_back(sigma_min + step * static_cast<double>(i));
  s.levels.back() = sigma_max;
  return s;
}

NoiseSchedule log_uniform_sampler(double sigma_min, double sigma_max) {
  ADSM_REQUIRE(sigma_min > 0.0 && sigma_max > sigma_min,
               "log-uniform sampler needs 0 < sigma_min < sigma_max");
  return NoiseSchedule{{}, sigma_min, sigma_max, ScheduleMode::log_uniform};
}

double sample_sigma_loguniform(double sigma_min, double sigma_max, Rng& rng) {
  ADSM_REQUIRE(sigma_min > 0.0 && sigma_max > sigma_min,
               "log-uniform sampling needs 0 < sigma_min < sigma_max");
  std::uniform_real_distribution<double> u(std::log(sigma_min), std::log(sigma_max));
  return std::clamp(std::exp(u(rng)), sigma_min, sigma_max);
}

Tensor standard_normal(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> nd(0.0, 1.0);
  for (double& v : t.data()) v = nd(rng);
  return t;
}

Perturbation perturb(const Tensor& x, double sigma, Rng& rng) {
  ADSM_REQUIRE(sigma >= 0.0, "perturb: sigma must be non-negative");
  Perturbation p{x, standard_normal(x.shape(), rng)};
  for (std::size_t i = 0; i < x.size(); ++i) p.noisy[i] += sigma * p.noise[i];
  return p;
}

MotionWeights uniform_weights(std::size_t tokens) {
  ADSM_REQUIRE(tokens > 0, "uniform_weights: zero tokens");
  MotionWeights mw;
  mw.weights.assign(tokens, 1.0 / static_cast<double>(tokens));
  mw.uniform_fallback = true;
  return mw;
}

MotionWeights motion_weights(const Tensor& frames, std::size_t patch) {
  check_frames(frames, "motion_weights");
  const std::size_t n = frames.dim(0), h = frames.dim(1), w = frames.dim(2), c = frames.dim(3);
  ADSM_REQUIRE(n >= 2, "motion_weights needs at least two frames");
  ADSM_REQUIRE(patch > 0 && h % patch == 0 && w % patch == 0,
               "motion_weights: frame size not divisible by patch size");
  const std::size_t rows = h / patch, cols = w / patch, spatial = rows * cols;
  const double* first = frames.data().data();
  const double* last = first + (n - 1) * h * w * c;

  MotionWeights mw;
  mw.magnitudes.assign(spatial, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t q = 0; q < cols; ++q) {
      double acc = 0.0;
      for (std::size_t l = 0; l < c; ++l) {
        double mx = 0.0;
        for (std::size_t dy = 0; dy < patch; ++dy)
          for (std::size_t dx = 0; dx < patch; ++dx) {
            const std::size_t i = ((r * patch + dy) * w + q * patch + dx) * c + l;
            mx = std::max(mx, std::abs(last[i] - first[i]));
          }
        acc += mx;
      }
      mw.magnitudes[r * cols + q] = acc / static_cast<double>(c);
    }

  double total = 0.0;
  for (double v : mw.magnitudes) total += v;
  if (total <= 0.0) {
    auto u = uniform_weights(n * spatial);
    u.magnitudes = std::move(mw.magnitudes);
    return u;
  }
  // Each spatial share is spread evenly over the n frames of its column.
  mw.weights.resize(n * spatial);
  const double denom = total * static_cast<double>(n);
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t j = 0; j < spatial; ++j) mw.weights[f * spatial + j] = mw.magnitudes[j] / denom;
  return mw;
}

std::vector<std::size_t> window_starts(std::size_t frames, std::size_t window) {
  ADSM_REQUIRE(window > 0, "window length must be positive");
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= frames; s += window) starts.push_back(s);
  return starts;
}

Tensor extract_window(const Tensor& frames, std::size_t start, std::size_t window) {
  check_frames(frames, "extract_window");
  ADSM_REQUIRE(start + window <= frames.dim(0), "extract_window: window exceeds video");
  const std::size_t per = frames.size() / frames.dim(0);
  Tensor out(Shape{window, frames.dim(1), frames.dim(2), frames.dim(3)});
  std::copy_n(frames.data().data() + start * per, window * per, out.data().data());
  return out;
}

}  // namespace adsm
