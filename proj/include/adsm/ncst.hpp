#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adsm/autodiff.hpp"
#include "adsm/video.hpp"

namespace adsm {

enum class AttentionLayout { joint, factorized };
enum class OutputScaling { inverse_sigma, none };

const char* to_string(AttentionLayout a);
const char* to_string(OutputScaling s);

/// Architecture of the noise-conditioned score transformer.
struct NcstConfig {
  // input geometry
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t patch = 8;
  // transformer
  std::size_t embed = 64;
  std::size_t heads = 4;
  std::size_t blocks = 4;
  std::size_t ffn_mult = 4;
  AttentionLayout attention = AttentionLayout::joint;
  // conditioning
  std::size_t time_width = 64;
  std::size_t scene_width = 64;
  std::size_t scene_classes = 2;
  bool scene_condition = true;
  // noise ladder used to map sigma to a (fractional) step index
  std::size_t levels = 20;
  double sigma_min = 0.001;
  double sigma_max = 1.0;
  OutputScaling output_scaling = OutputScaling::inverse_sigma;

  std::size_t token_count() const { return frames * (height / patch) * (width / patch); }
  std::size_t token_dim() const { return patch * patch * channels; }
  std::size_t condition_width() const { return time_width + scene_width; }

  void validate() const;
  /// Sorted key=value lines; the basis of the fingerprint.
  std::string canonical() const;
  std::uint64_t fingerprint() const;
};

std::string fingerprint_hex(std::uint64_t fp);

/// Throws IncompatibleError naming the model fingerprint and the fingerprint
/// the model would need for this video's geometry.
void check_geometry(const NcstConfig& c, const VideoSequence& video);

/// Per-block S-AdaLN modulation. Each vector has shape [embed].
struct BlockModulation {
  Var shift1, scale1, gate1;  // beta^1, gamma^1, alpha^1
  Var shift2, scale2, gate2;  // beta^2, gamma^2, alpha^2
};

class NcstModel {
 public:
  NcstModel(NcstConfig config, std::uint64_t seed);

  NcstModel(const NcstModel&) = delete;
  NcstModel& operator=(const NcstModel&) = delete;
  NcstModel(NcstModel&&) = default;
  NcstModel& operator=(NcstModel&&) = default;

  const NcstConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter* find(const std::string& name);
  std::size_t parameter_count() const;

  /// Fractional ladder position of sigma: 1 at sigma_min, L at sigma_max.
  double step_index(double sigma) const;

  /// Sinusoidal encoding of i followed by a two-layer GELU MLP. [time_width]
  Var embed_timestep(double step, Tape* tape) const;
  /// Learned table row for scene y, or zeros when scene conditioning is off.
  Var embed_scene(int scene, Tape* tape) const;
  /// z = concat(e_i, e_y).
  Var combine_condition(const Var& time_embedding, const Var& scene_embedding) const;
  BlockModulation block_modulation(std::size_t block, const Var& z, Tape* tape) const;
  /// h' = h + a1 * MHA(g1 * LN(h) + b1);  h'' = h' + a2 * FFN(g2 * LN(h') + b2)
  Var s_adaln_block(std::size_t block, const Var& h, const BlockModulation& mod, Tape* tape) const;

  /// Multi-head self-attention of block `block` on [N, embed] tokens.
  Var attention(std::size_t block, const Var& x, Tape* tape) const;
  Var feed_forward(std::size_t block, const Var& x, Tape* tape) const;

  /// Estimated score per token, [N, d*d*c].
  Var forward(const Var& tokens, double sigma, int scene, Tape* tape) const;
  Tensor score_tokens(const Tensor& tokens, double sigma, int scene) const;

  /// Fixed sinusoidal (frame, row, col) encodings, [N, embed].
  const Tensor& position_encoding() const { return position_; }

 private:
  struct BlockParams {
    std::size_t mod_w, mod_b, qkv_w, qkv_b, out_w, out_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  std::size_t add_param(std::string name, Tensor value);
  const Parameter& p(std::size_t i) const { return params_[i]; }

  NcstConfig config_;
  std::vector<Parameter> params_;
  std::size_t patch_w_ = 0, patch_b_ = 0;
  std::size_t time_fc1_w_ = 0, time_fc1_b_ = 0, time_fc2_w_ = 0, time_fc2_b_ = 0;
  std::size_t scene_table_ = 0;
  std::size_t head_w_ = 0, head_b_ = 0;
  std::vector<BlockParams> blocks_;
  Tensor position_;
};

/// Sinusoidal features of a scalar position, [width].
Tensor sinusoidal_features(double position, std::size_t width, double max_period);

}  // namespace adsm
