#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adsm/ncst.hpp"
#include "adsm/video.hpp"

namespace adsm {

/// Anything that estimates the score of noisy frames [n, H, W, c].
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual Tensor score(const Tensor& noisy, double sigma, int scene) const = 0;
};

/// NCST evaluated patch-wise and reassembled into frame layout.
class NcstScoreModel final : public ScoreModel {
 public:
  explicit NcstScoreModel(const NcstModel& model) : model_(model) {}
  Tensor score(const Tensor& noisy, double sigma, int scene) const override;

 private:
  const NcstModel& model_;
};

/// The zero field.
class ZeroScoreModel final : public ScoreModel {
 public:
  Tensor score(const Tensor& noisy, double, int) const override { return Tensor::zeros(noisy.shape()); }
};

/// Exact score of N(mean, var I) perturbed at sigma: -(x - mean)/(var + sigma^2).
/// With var = 0 and mean = the clean frames this is the DSM target.
class GaussianScoreModel final : public ScoreModel {
 public:
  GaussianScoreModel(Tensor mean, double var) : mean_(std::move(mean)), var_(var) {}
  GaussianScoreModel(double mean, double var) : scalar_mean_(mean), var_(var) {}
  Tensor score(const Tensor& noisy, double sigma, int scene) const override;

 private:
  Tensor mean_;
  double scalar_mean_ = 0.0;
  double var_ = 0.0;
};

enum class NormMode { full, patch_mean };

struct ScoreConfig {
  std::size_t levels = 20;
  double sigma_min = 0.001;
  double sigma_max = 1.0;
  ScheduleMode schedule = ScheduleMode::geometric;
  std::size_t clip_frames = 0;          // T; 0 means 2n
  std::vector<double> fusion_weights;   // empty means uniform
  std::uint64_t seed = 0;
  bool autoregressive = true;           // perturb the previous denoised output
  bool appearance = true;               // divide by PSNR
  bool reuse_noise = false;             // one epsilon for every level
  NormMode norm = NormMode::full;
  std::size_t patch = 8;                // for NormMode::patch_mean
  double psnr_peak = 1.0;
  double mse_floor = 1e-10;

  NoiseSchedule make_schedule() const;
  void validate() const;
};

const char* to_string(ScheduleMode m);
const char* to_string(NormMode m);

/// x^ = x~ + sigma^2 s(x~, sigma)
Tensor denoise_step(const Tensor& noisy, double sigma, const ScoreModel& model, int scene);

/// 10 log10(peak^2 / max(MSE, floor)); 100 dB for identical inputs at the defaults.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0, double mse_floor = 1e-10);

/// Per-level record of one window.
struct LevelScores {
  std::vector<double> norm;   // |s(x~, sigma_i)|
  std::vector<double> psnr;   // PSNR(x^, x_t)
  std::vector<double> drift;  // |x. - x_t| after level i
  std::vector<double> scores;

  /// norm/psnr when `appearance`, otherwise norm.
  std::vector<double> combined(bool appearance) const;
};

/// The denoise-and-compare ladder on one n-frame window. Levels must be
/// strictly ascending.
LevelScores autoregressive_score(const Tensor& window, const ScoreModel& model,
                                 std::span<const double> levels, int scene, Rng& rng,
                                 const ScoreConfig& options);

/// Max of the window scores whose start lies in each T-frame clip. A clip
/// with no window start takes the previous clip's value (0 if leading).
std::vector<double> clip_max_aggregate(std::span<const double> window_scores,
                                       std::span<const std::size_t> starts, std::size_t covered_frames,
                                       std::size_t clip_frames);
/// Per-frame values from per-clip values.
std::vector<double> expand_clips(std::span<const double> clip_scores, std::size_t covered_frames,
                                 std::size_t clip_frames);

/// Min-max to [0, 1]; a constant series maps to zeros.
std::vector<double> normalize_scores(std::span<const double> series);

/// sum_i w_i S_i(t); `levels[i]` is S_i over t. Empty weights mean uniform.
std::vector<double> fuse_levels(const std::vector<std::vector<double>>& levels,
                                std::span<const double> weights);

struct VideoScores {
  std::string video_id;
  int scene = 0;
  std::size_t length = 0;         // frames in the video
  std::size_t window = 0;         // n
  std::size_t covered = 0;        // frames with a score
  std::vector<std::size_t> starts;
  std::vector<LevelScores> windows;
  std::vector<double> indicator;  // one per covered frame, in [0, 1]
};

/// Window-level scores to the per-frame indicator.
std::vector<double> finalize_indicator(const VideoScores& vs, bool appearance,
                                       std::span<const double> weights, std::size_t clip_frames);

VideoScores score_video(const VideoSequence& video, const ScoreModel& model, const ScoreConfig& config,
                        std::size_t window);

/// Stream seed for window t of a video.
Rng window_rng(std::uint64_t seed, const std::string& video_id, std::size_t t);

/// scores_raw.csv: video_id,t,level,score
void write_raw_scores(const std::filesystem::path& file, std::span<const VideoScores> videos);
/// scores_final.csv: video_id,frame_index,indicator
void write_final_scores(const std::filesystem::path& file, std::span<const VideoScores> videos);

struct FinalScores {
  std::string video_id;
  std::vector<double> indicator;
};
std::vector<FinalScores> read_final_scores(const std::filesystem::path& file);

}  // namespace adsm
