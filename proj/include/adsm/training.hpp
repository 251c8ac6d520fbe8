#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adsm/checkpoint.hpp"
#include "adsm/ncst.hpp"
#include "adsm/video.hpp"

namespace adsm {

struct TrainConfig {
  NcstConfig model;
  std::size_t epochs = 100;
  std::size_t batch = 20;
  double lr = 1e-4;
  double sigma_min = 0.001;
  double sigma_max = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path data;  // dataset root holding train/
  bool motion_weights = true;
  bool scene_condition = true;
  double clip_norm = 1.0;  // global gradient norm cap; 0 disables

  void validate() const;
};

/// One n-frame training sequence.
struct TrainWindow {
  Tensor frames;  // [n, H, W, c]
  int scene = 0;
};

/// Consecutive non-overlapping windows of every video, in video order.
std::vector<TrainWindow> make_windows(std::span<const VideoSequence> videos, std::size_t n);

/// -(noisy - clean) / sigma^2
Tensor dsm_target(const Tensor& noisy, const Tensor& clean, double sigma);

/// (sigma^2 / 2) * sum_j w_j |predicted_j - target_j|^2 for [N, D] token scores.
Var weighted_dsm_loss(const Var& predicted, const Tensor& target, std::span<const double> weights, double sigma);

struct LossTerms {
  Var loss;                     // scalar
  Tensor noise;                 // epsilon in frame layout [n, H, W, c]
  std::vector<double> weights;  // omega_j, one per token
  double sigma = 0.0;
};

/// (sigma^2 / 2) * sum_j w_j |s(P~_j, sigma) - target_j|^2 on a fresh
/// perturbation of `frames`.
LossTerms ncst_loss(const NcstModel& model, const Tensor& frames, int scene, double sigma, Rng& rng,
                    bool use_motion_weights, Tape* tape);
/// Same loss with the noise supplied by the caller.
LossTerms ncst_loss_with_noise(const NcstModel& model, const Tensor& frames, int scene, double sigma,
                               const Tensor& noise, bool use_motion_weights, Tape* tape);

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};
using EpochCallback = std::function<void(const EpochReport&)>;

/// Runs the training loop on `model` in place. Throws NumericFault naming
/// the epoch, batch and sigma if a loss turns non-finite.
TrainingMetadata train_model(NcstModel& model, std::span<const TrainWindow> windows,
                             const TrainConfig& config, AdamaxState& state,
                             const EpochCallback& on_epoch = {});

/// Loads `config.data`/train, trains a fresh model and returns its checkpoint.
NcstCheckpoint train(const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace adsm
