#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adsm/tensor.hpp"

namespace adsm {

using Rng = std::mt19937_64;

/// Deterministic stream derived from a base seed and a key path, e.g.
/// (seed, video index) or (seed, video hash, window start).
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// Frames are stored as a [n, H, W, c] tensor with clean pixels in [0, 1].
struct VideoSequence {
  std::string video_id;
  int scene = 0;
  Tensor frames;
  std::vector<std::uint8_t> frame_labels;  // test split only; 1 = anomalous

  std::size_t length() const { return frames.rank() == 4 ? frames.dim(0) : 0; }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
  std::size_t channels() const { return frames.dim(3); }
};

struct TokenPosition {
  std::size_t frame = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const TokenPosition&, const TokenPosition&) = default;
};

/// Flattened d x d x c patches, frame-major then row-major.
struct TokenBatch {
  Tensor tokens;  // [N, d*d*c]
  std::vector<TokenPosition> positions;
  std::size_t patch = 0;
  std::size_t channels = 0;

  std::size_t count() const { return positions.size(); }
};

TokenBatch patchify(const Tensor& frames, std::size_t patch);
/// Places every token at its recorded position; the inverse of patchify.
Tensor unpatchify(const TokenBatch& batch, std::size_t height, std::size_t width);

enum class ScheduleMode { geometric, linear, log_uniform };

/// Ascending noise levels.
struct NoiseSchedule {
  std::vector<double> levels;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  ScheduleMode mode = ScheduleMode::geometric;

  std::size_t size() const { return levels.size(); }
  double ratio() const;
};

/// sigma_i = sigma_min * r^(i-1), r = (sigma_max/sigma_min)^(1/(L-1)).
NoiseSchedule build_noise_schedule(double sigma_min, double sigma_max, std::size_t levels);
/// Evenly spaced levels in sigma (the alternative evaluation ladder).
NoiseSchedule build_linear_schedule(double sigma_min, double sigma_max, std::size_t levels);
/// Bounds-only schedule used by the training sampler.
NoiseSchedule log_uniform_sampler(double sigma_min, double sigma_max);

double sample_sigma_loguniform(double sigma_min, double sigma_max, Rng& rng);

Tensor standard_normal(Shape shape, Rng& rng);

struct Perturbation {
  Tensor noisy;
  Tensor noise;
};

/// noisy = x + sigma * noise, noise ~ N(0, I).
Perturbation perturb(const Tensor& x, double sigma, Rng& rng);

/// Per-token loss weights from the key-frame difference |f_last - f_first|.
struct MotionWeights {
  std::vector<double> weights;     // one per token, sums to 1
  std::vector<double> magnitudes;  // one per spatial patch
  bool uniform_fallback = false;
};

MotionWeights motion_weights(const Tensor& frames, std::size_t patch);
MotionWeights uniform_weights(std::size_t tokens);

/// Starts of consecutive non-overlapping windows; the partial tail is dropped.
std::vector<std::size_t> window_starts(std::size_t frames, std::size_t window);
Tensor extract_window(const Tensor& frames, std::size_t start, std::size_t window);

}  // namespace adsm
