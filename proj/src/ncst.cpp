#include "adsm/ncst.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "adsm/errors.hpp"
#include "adsm/ops.hpp"

namespace adsm {

const char* to_string(AttentionLayout a) {
  return a == AttentionLayout::joint ? "joint" : "factorized";
}

const char* to_string(OutputScaling s) {
  return s == OutputScaling::inverse_sigma ? "inverse_sigma" : "none";
}

void NcstConfig::validate() const {
  ADSM_REQUIRE(frames >= 1 && height >= 1 && width >= 1 && channels >= 1 && patch >= 1,
               "ncst config: geometry extents must be positive");
  ADSM_REQUIRE(height % patch == 0 && width % patch == 0,
               "ncst config: frame size not divisible by patch size");
  ADSM_REQUIRE(embed >= 1 && heads >= 1 && embed % heads == 0,
               "ncst config: embed width must be divisible by head count");
  ADSM_REQUIRE(blocks >= 1 && ffn_mult >= 1, "ncst config: need at least one block");
  ADSM_REQUIRE(time_width >= 2 && time_width % 2 == 0, "ncst config: time width must be even");
  ADSM_REQUIRE(scene_width >= 1 && scene_classes >= 1, "ncst config: bad scene embedding size");
  ADSM_REQUIRE(levels >= 1 && sigma_min > 0.0 && sigma_max > sigma_min,
               "ncst config: bad noise ladder");
}

std::string NcstConfig::canonical() const {
  std::map<std::string, std::string> kv;
  auto num = [](auto v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  kv["attention"] = to_string(attention);
  kv["blocks"] = num(blocks);
  kv["channels"] = num(channels);
  kv["embed"] = num(embed);
  kv["ffn_mult"] = num(ffn_mult);
  kv["frames"] = num(frames);
  kv["heads"] = num(heads);
  kv["height"] = num(height);
  kv["levels"] = num(levels);
  kv["output_scaling"] = to_string(output_scaling);
  kv["patch"] = num(patch);
  kv["scene_classes"] = num(scene_classes);
  kv["scene_condition"] = scene_condition ? "1" : "0";
  kv["scene_width"] = num(scene_width);
  kv["sigma_max"] = num(sigma_max);
  kv["sigma_min"] = num(sigma_min);
  kv["time_width"] = num(time_width);
  kv["width"] = num(width);
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

std::uint64_t NcstConfig::fingerprint() const {
  // FNV-1a, 64 bit
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

void check_geometry(const NcstConfig& c, const VideoSequence& video) {
  if (video.height() == c.height && video.width() == c.width && video.channels() == c.channels) return;
  NcstConfig data = c;
  data.height = video.height();
  data.width = video.width();
  data.channels = video.channels();
  auto dims = [](const NcstConfig& x) {
    return std::to_string(x.height) + "x" + std::to_string(x.width) + "x" + std::to_string(x.channels);
  };
  throw IncompatibleError("model geometry " + dims(c) + " (fingerprint " + fingerprint_hex(c.fingerprint()) +
                          ") is incompatible with video " + video.video_id + " of geometry " + dims(data) +
                          " (fingerprint " + fingerprint_hex(data.fingerprint()) + ")");
}

Tensor sinusoidal_features(double position, std::size_t width, double max_period) {
  Tensor out(Shape{width});
  const std::size_t half = width / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(max_period) * static_cast<double>(k) /
                                 static_cast<double>(half));
    out[k] = std::cos(position * freq);
    out[half + k] = std::sin(position * freq);
  }
  return out;
}

namespace {

Tensor xavier(Shape shape, Rng& rng) {
  const double fan_in = static_cast<double>(shape[0]);
  const double fan_out = static_cast<double>(shape[1]);
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> nd(0.0, stddev);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = nd(rng);
  return t;
}

// Steps per ladder index fed to the sinusoidal encoder.
constexpr double kStepScale = 50.0;
constexpr double kMaxPeriod = 10000.0;

}  // namespace

std::size_t NcstModel::add_param(std::string name, Tensor value) {
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.size() - 1;
}

NcstModel::NcstModel(NcstConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const NcstConfig& c = config_;
  Rng rng = derive_rng(seed, {0x4e435354ull});
  const std::size_t W = c.embed, P = c.token_dim(), Z = c.condition_width();
  params_.reserve(16 + 10 * c.blocks);

  patch_w_ = add_param("patch_embed.weight", xavier({P, W}, rng));
  patch_b_ = add_param("patch_embed.bias", Tensor::zeros({W}));
  time_fc1_w_ = add_param("time_mlp.fc1.weight", gaussian({c.time_width, c.time_width}, 0.02, rng));
  time_fc1_b_ = add_param("time_mlp.fc1.bias", Tensor::zeros({c.time_width}));
  time_fc2_w_ = add_param("time_mlp.fc2.weight", gaussian({c.time_width, c.time_width}, 0.02, rng));
  time_fc2_b_ = add_param("time_mlp.fc2.bias", Tensor::zeros({c.time_width}));
  if (c.scene_condition)
    scene_table_ = add_param("scene_embed.table", gaussian({c.scene_classes, c.scene_width}, 0.02, rng));

  for (std::size_t b = 0; b < c.blocks; ++b) {
    const std::string pre = "blocks." + std::to_string(b) + ".";
    BlockParams bp{};
    // adaLN-Zero: the modulation map starts at zero, so gamma = 1, beta = 0
    // and both residual gates alpha are exactly zero.
    bp.mod_w = add_param(pre + "modulation.weight", Tensor::zeros({Z, 6 * W}));
    bp.mod_b = add_param(pre + "modulation.bias", Tensor::zeros({6 * W}));
    bp.qkv_w = add_param(pre + "attn.qkv.weight", xavier({W, 3 * W}, rng));
    bp.qkv_b = add_param(pre + "attn.qkv.bias", Tensor::zeros({3 * W}));
    bp.out_w = add_param(pre + "attn.out.weight", xavier({W, W}, rng));
    bp.out_b = add_param(pre + "attn.out.bias", Tensor::zeros({W}));
    bp.fc1_w = add_param(pre + "ffn.fc1.weight", xavier({W, c.ffn_mult * W}, rng));
    bp.fc1_b = add_param(pre + "ffn.fc1.bias", Tensor::zeros({c.ffn_mult * W}));
    bp.fc2_w = add_param(pre + "ffn.fc2.weight", xavier({c.ffn_mult * W, W}, rng));
    bp.fc2_b = add_param(pre + "ffn.fc2.bias", Tensor::zeros({W}));
    blocks_.push_back(bp);
  }
  head_w_ = add_param("head.weight", Tensor::zeros({W, P}));
  head_b_ = add_param("head.bias", Tensor::zeros({P}));

  // (frame, row, col) encodings, each axis in its own slice of the width
  const std::size_t rows = c.height / c.patch, cols = c.width / c.patch;
  const std::size_t part = 2 * (W / 6);
  position_ = Tensor(Shape{c.token_count(), W});
  for (std::size_t f = 0; f < c.frames; ++f)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t q = 0; q < cols; ++q) {
        const std::size_t t = (f * rows + r) * cols + q;
        const double axes[3] = {double(f), double(r), double(q)};
        for (std::size_t a = 0; a < 3 && part > 0; ++a) {
          Tensor enc = sinusoidal_features(axes[a], part, kMaxPeriod);
          std::copy(enc.data().begin(), enc.data().end(),
                    position_.data().begin() + static_cast<long>(t * W + a * part));
        }
      }
}

Parameter* NcstModel::find(const std::string& name) {
  for (auto& q : params_)
    if (q.name == name) return &q;
  return nullptr;
}

std::size_t NcstModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& q : params_) n += q.value.size();
  return n;
}

double NcstModel::step_index(double sigma) const {
  const NcstConfig& c = config_;
  ADSM_REQUIRE(sigma > 0.0, "step_index: sigma must be positive");
  if (c.levels == 1) return 1.0;
  const double frac = std::log(sigma / c.sigma_min) / std::log(c.sigma_max / c.sigma_min);
  ADSM_REQUIRE(frac > -1e-9 && frac < 1.0 + 1e-9,
               "sigma " + std::to_string(sigma) + " outside the model's noise range");
  return 1.0 + static_cast<double>(c.levels - 1) * std::clamp(frac, 0.0, 1.0);
}

Var NcstModel::embed_timestep(double step, Tape* tape) const {
  ADSM_REQUIRE(step >= 1.0 - 1e-9 && step <= static_cast<double>(config_.levels) + 1e-9,
               "embed_timestep: step index outside [1, L]");
  Var enc = Var::constant(
      sinusoidal_features(step * kStepScale, config_.time_width, kMaxPeriod).reshaped({1, config_.time_width}));
  Var h = add(matmul(enc, param(p(time_fc1_w_), tape)), param(p(time_fc1_b_), tape));
  h = add(matmul(gelu(h), param(p(time_fc2_w_), tape)), param(p(time_fc2_b_), tape));
  return reshape(h, {config_.time_width});
}

Var NcstModel::embed_scene(int scene, Tape* tape) const {
  if (!config_.scene_condition) return Var::constant(Tensor::zeros({config_.scene_width}));
  if (scene < 0 || static_cast<std::size_t>(scene) >= config_.scene_classes)
    throw DataError("unseen scene class " + std::to_string(scene) + " (model knows " +
                    std::to_string(config_.scene_classes) + ")");
  Tensor onehot(Shape{1, config_.scene_classes});
  onehot[static_cast<std::size_t>(scene)] = 1.0;
  return reshape(matmul(Var::constant(std::move(onehot)), param(p(scene_table_), tape)),
                 {config_.scene_width});
}

Var NcstModel::combine_condition(const Var& time_embedding, const Var& scene_embedding) const {
  ADSM_REQUIRE(time_embedding.shape() == Shape{config_.time_width} &&
                   scene_embedding.shape() == Shape{config_.scene_width},
               "combine_condition: embedding widths do not match the config");
  const Var parts[2] = {time_embedding, scene_embedding};
  return concat(parts, 0);
}

BlockModulation NcstModel::block_modulation(std::size_t block, const Var& z, Tape* tape) const {
  ADSM_REQUIRE(block < blocks_.size(), "block index out of range");
  ADSM_REQUIRE(z.shape() == Shape{config_.condition_width()}, "block_modulation: bad z width");
  const BlockParams& bp = blocks_[block];
  const std::size_t W = config_.embed;
  Var zz = reshape(gelu(z), {1, config_.condition_width()});
  Var m = add(matmul(zz, param(p(bp.mod_w), tape)), param(p(bp.mod_b), tape));
  m = reshape(m, {6 * W});
  const std::size_t sizes[6] = {W, W, W, W, W, W};
  auto parts = split(m, 0, sizes);
  Var one = Var::constant(Tensor(Shape{W}, 1.0));
  return BlockModulation{parts[0], add(parts[1], one), parts[2],
                         parts[3], add(parts[4], one), parts[5]};
}

namespace {

// Attention within groups: x is [groups, seq, W]-ordered tokens given as
// q, k, v of shape [groups*seq, W]. Returns [groups*seq, W].
Var grouped_attention(const Var& q, const Var& k, const Var& v, std::size_t groups,
                      std::size_t seq, std::size_t heads, std::size_t dh) {
  const std::size_t W = heads * dh;
  (void)W;
  Var qh = reshape(permute(reshape(q, {groups, seq, heads, dh}), {0, 2, 1, 3}), {groups * heads, seq, dh});
  Var kh = reshape(permute(reshape(k, {groups, seq, heads, dh}), {0, 2, 3, 1}), {groups * heads, dh, seq});
  Var vh = reshape(permute(reshape(v, {groups, seq, heads, dh}), {0, 2, 1, 3}), {groups * heads, seq, dh});
  Var att = softmax(scale(matmul(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh))));
  Var o = matmul(att, vh);  // [groups*heads, seq, dh]
  return reshape(permute(reshape(o, {groups, heads, seq, dh}), {0, 2, 1, 3}), {groups * seq, heads * dh});
}

}  // namespace

Var NcstModel::attention(std::size_t block, const Var& x, Tape* tape) const {
  const BlockParams& bp = blocks_[block];
  const NcstConfig& c = config_;
  const std::size_t W = c.embed, N = x.shape()[0], dh = W / c.heads;
  Var qkv = add(matmul(x, param(p(bp.qkv_w), tape)), param(p(bp.qkv_b), tape));
  const std::size_t sizes[3] = {W, W, W};
  auto parts = split(qkv, 1, sizes);
  Var o;
  if (c.attention == AttentionLayout::joint) {
    o = grouped_attention(parts[0], parts[1], parts[2], 1, N, c.heads, dh);
  } else {
    const std::size_t frames = c.frames, spatial = N / frames;
    if (block % 2 == 0) {
      // spatial: attend within each frame
      o = grouped_attention(parts[0], parts[1], parts[2], frames, spatial, c.heads, dh);
    } else {
      // temporal: attend across frames at each spatial location
      auto to_spatial_major = [&](const Var& t) {
        return reshape(permute(reshape(t, {frames, spatial, W}), {1, 0, 2}), {N, W});
      };
      Var ot = grouped_attention(to_spatial_major(parts[0]), to_spatial_major(parts[1]),
                                 to_spatial_major(parts[2]), spatial, frames, c.heads, dh);
      o = reshape(permute(reshape(ot, {spatial, frames, W}), {1, 0, 2}), {N, W});
    }
  }
  return add(matmul(o, param(p(bp.out_w), tape)), param(p(bp.out_b), tape));
}

Var NcstModel::feed_forward(std::size_t block, const Var& x, Tape* tape) const {
  const BlockParams& bp = blocks_[block];
  Var h = gelu(add(matmul(x, param(p(bp.fc1_w), tape)), param(p(bp.fc1_b), tape)));
  return add(matmul(h, param(p(bp.fc2_w), tape)), param(p(bp.fc2_b), tape));
}

Var NcstModel::s_adaln_block(std::size_t block, const Var& h, const BlockModulation& mod,
                             Tape* tape) const {
  ADSM_REQUIRE(block < blocks_.size(), "block index out of range");
  ADSM_REQUIRE(h.shape().size() == 2 && h.shape()[1] == config_.embed,
               "s_adaln_block: hidden state must be [N, embed], got " + shape_str(h.shape()));
  Var a = add(mul(layer_norm(h), mod.scale1), mod.shift1);
  Var h1 = add(h, mul(attention(block, a, tape), mod.gate1));
  Var b = add(mul(layer_norm(h1), mod.scale2), mod.shift2);
  return add(h1, mul(feed_forward(block, b, tape), mod.gate2));
}

Var NcstModel::forward(const Var& tokens, double sigma, int scene, Tape* tape) const {
  const NcstConfig& c = config_;
  ADSM_REQUIRE(tokens.shape() == (Shape{c.token_count(), c.token_dim()}),
               "ncst_forward: expected tokens " + shape_str({c.token_count(), c.token_dim()}) +
                   ", got " + shape_str(tokens.shape()));
  Var h = add(matmul(tokens, param(p(patch_w_), tape)), param(p(patch_b_), tape));
  h = add(h, Var::view(position_));
  Var z = combine_condition(embed_timestep(step_index(sigma), tape), embed_scene(scene, tape));
  for (std::size_t b = 0; b < c.blocks; ++b) h = s_adaln_block(b, h, block_modulation(b, z, tape), tape);
  Var out = add(matmul(layer_norm(h), param(p(head_w_), tape)), param(p(head_b_), tape));
  if (c.output_scaling == OutputScaling::inverse_sigma) out = scale(out, 1.0 / sigma);
  return out;
}

Tensor NcstModel::score_tokens(const Tensor& tokens, double sigma, int scene) const {
  return forward(Var::view(tokens), sigma, scene, nullptr).value();
}

}  // namespace adsm
