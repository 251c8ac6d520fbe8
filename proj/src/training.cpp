#include "adsm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "adsm/dataset_io.hpp"
#include "adsm/errors.hpp"
#include "adsm/ops.hpp"

namespace adsm {

void TrainConfig::validate() const {
  ADSM_REQUIRE(epochs >= 1, "train config: epochs must be at least 1");
  ADSM_REQUIRE(batch >= 1, "train config: batch must be at least 1");
  ADSM_REQUIRE(lr > 0.0, "train config: lr must be positive");
  ADSM_REQUIRE(sigma_min > 0.0 && sigma_min < sigma_max, "train config: need 0 < sigma_min < sigma_max");
  ADSM_REQUIRE(clip_norm >= 0.0, "train config: clip_norm must be non-negative");
  model.validate();
}

std::vector<TrainWindow> make_windows(std::span<const VideoSequence> videos, std::size_t n) {
  std::vector<TrainWindow> out;
  for (const auto& v : videos)
    for (std::size_t s : window_starts(v.length(), n)) out.push_back({extract_window(v.frames, s, n), v.scene});
  return out;
}

Tensor dsm_target(const Tensor& noisy, const Tensor& clean, double sigma) {
  ADSM_REQUIRE(sigma > 0.0, "dsm_target: sigma must be positive");
  ADSM_REQUIRE(noisy.shape() == clean.shape(), "dsm_target: shape mismatch " + shape_str(noisy.shape()) +
                                                   " vs " + shape_str(clean.shape()));
  Tensor t(noisy.shape());
  const double inv = 1.0 / (sigma * sigma);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = -(noisy[i] - clean[i]) * inv;
  return t;
}

Var weighted_dsm_loss(const Var& predicted, const Tensor& target, std::span<const double> weights, double sigma) {
  ADSM_REQUIRE(predicted.shape() == target.shape() && target.rank() == 2,
               "dsm loss: predicted " + shape_str(predicted.shape()) + " vs target " + shape_str(target.shape()));
  ADSM_REQUIRE(weights.size() == target.dim(0), "dsm loss: one weight per token required");
  Var diff = sub(predicted, Var::constant(target));
  Var per_token = sum_last(mul(diff, diff));
  Tensor wt(Shape{weights.size()}, std::vector<double>(weights.begin(), weights.end()));
  return scale(sum(mul(per_token, Var::constant(std::move(wt)))), 0.5 * sigma * sigma);
}

LossTerms ncst_loss_with_noise(const NcstModel& model, const Tensor& frames, int scene, double sigma,
                               const Tensor& noise, bool use_motion_weights, Tape* tape) {
  const NcstConfig& c = model.config();
  ADSM_REQUIRE(frames.shape() == noise.shape(), "ncst_loss: noise shape differs from frames");
  ADSM_REQUIRE(sigma > 0.0, "ncst_loss: sigma must be positive");
  Tensor noisy(frames.shape());
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] = frames[i] + sigma * noise[i];

  TokenBatch clean_tokens = patchify(frames, c.patch);
  TokenBatch noisy_tokens = patchify(noisy, c.patch);
  Tensor target = dsm_target(noisy_tokens.tokens, clean_tokens.tokens, sigma);
  MotionWeights w = use_motion_weights ? motion_weights(frames, c.patch)
                                       : uniform_weights(noisy_tokens.count());

  Var s = model.forward(Var::constant(std::move(noisy_tokens.tokens)), sigma, scene, tape);
  Var loss = weighted_dsm_loss(s, target, w.weights, sigma);
  return LossTerms{loss, noise, std::move(w.weights), sigma};
}

LossTerms ncst_loss(const NcstModel& model, const Tensor& frames, int scene, double sigma, Rng& rng,
                    bool use_motion_weights, Tape* tape) {
  return ncst_loss_with_noise(model, frames, scene, sigma, standard_normal(frames.shape(), rng),
                              use_motion_weights, tape);
}

TrainingMetadata train_model(NcstModel& model, std::span<const TrainWindow> windows,
                             const TrainConfig& config, AdamaxState& state,
                             const EpochCallback& on_epoch) {
  config.validate();
  ADSM_REQUIRE(!windows.empty(), "train: no training windows");
  auto& params = model.parameters();
  if (state.m.empty()) state = AdamaxState::for_params(params);

  TrainingMetadata meta;
  meta.seed = config.seed;
  meta.lr0 = config.lr;
  meta.batch = config.batch;
  meta.clip_norm = config.clip_norm;
  meta.motion_weights = config.motion_weights;
  meta.sigma_min = config.sigma_min;
  meta.sigma_max = config.sigma_max;
  meta.windows = windows.size();

  std::vector<std::size_t> order(windows.size());
  std::vector<Tensor> accum;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cosine_anneal_lr(epoch, config.epochs, config.lr);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = derive_rng(config.seed, {0x5348ull, epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch);
      accum.assign(params.size(), Tensor{});
      for (std::size_t i = 0; i < params.size(); ++i) accum[i] = Tensor::zeros(params[i].value.shape());

      for (std::size_t k = start; k < stop; ++k) {
        Rng rng = derive_rng(config.seed, {0x4c4full, epoch, k});
        const double sigma = sample_sigma_loguniform(config.sigma_min, config.sigma_max, rng);
        const TrainWindow& w = windows[order[k]];
        Tape tape;
        double value = 0.0;
        std::vector<Tensor> g;
        try {
          LossTerms terms = ncst_loss(model, w.frames, w.scene, sigma, rng, config.motion_weights, &tape);
          value = terms.loss.value().item();
          g = tape.grad(terms.loss, std::span<const Parameter>(params));
        } catch (const NumericFault& e) {
          std::ostringstream os;
          os << "non-finite training loss at epoch " << epoch + 1 << ", batch " << batch_index
             << ", sigma " << sigma << ": " << e.what();
          throw NumericFault(os.str());
        }
        epoch_loss += value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          auto dst = accum[i].data();
          auto src = g[i].data();
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& a : accum)
        for (double& v : a.data()) v *= inv;
      if (config.clip_norm > 0.0) clip_global_norm(accum, config.clip_norm);
      adamax_step(params, accum, state, lr);
    }
    const double mean_loss = epoch_loss / static_cast<double>(order.size());
    meta.loss_history.push_back(mean_loss);
    meta.epochs = epoch + 1;
    if (on_epoch) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      on_epoch(EpochReport{epoch + 1, mean_loss, lr, secs});
    }
  }
  return meta;
}

NcstCheckpoint train(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  std::vector<VideoSequence> videos = read_split(config.data / "train");
  if (videos.empty()) throw DataError("training split is empty: " + (config.data / "train").string());

  NcstConfig mc = config.model;
  mc.scene_condition = config.scene_condition;
  mc.sigma_min = config.sigma_min;
  mc.sigma_max = config.sigma_max;
  for (const auto& v : videos) {
    if (std::any_of(v.frame_labels.begin(), v.frame_labels.end(), [](auto l) { return l != 0; }))
      throw DataError("training split contains anomalous frames (video " + v.video_id + ")");
    check_geometry(mc, v);
    if (mc.scene_condition && static_cast<std::size_t>(v.scene) >= mc.scene_classes)
      throw DataError("video " + v.video_id + " has scene " + std::to_string(v.scene) +
                      " but the model is configured for " + std::to_string(mc.scene_classes) + " scenes");
  }
  std::vector<TrainWindow> windows = make_windows(videos, mc.frames);
  if (windows.empty()) throw DataError("training videos are shorter than one window");

  NcstModel model(mc, config.seed);
  AdamaxState state;
  TrainConfig effective = config;
  effective.model = mc;
  TrainingMetadata meta = train_model(model, windows, effective, state, on_epoch);
  NcstCheckpoint ckpt = NcstCheckpoint::from_model(model);
  ckpt.optimizer = std::move(state);
  ckpt.meta = std::move(meta);
  return ckpt;
}

}  // namespace adsm
