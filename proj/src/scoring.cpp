#include "adsm/scoring.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "adsm/errors.hpp"

namespace adsm {

namespace {

// PSNR below this is treated as this value in the denominator, so a
// reconstruction worse than the peak (MSE > R^2) cannot flip the sign.
constexpr double kPsnrFloorDb = 1.0;

void check_window(const Tensor& t, const char* what) {
  ADSM_REQUIRE(t.rank() == 4, std::string(what) + ": expected [n,H,W,c] frames, got " + shape_str(t.shape()));
}

}  // namespace

Tensor NcstScoreModel::score(const Tensor& noisy, double sigma, int scene) const {
  const NcstConfig& c = model_.config();
  check_window(noisy, "ncst score");
  if (noisy.dim(0) != c.frames || noisy.dim(1) != c.height || noisy.dim(2) != c.width || noisy.dim(3) != c.channels)
    throw ContractViolation("ncst score: window " + shape_str(noisy.shape()) + " does not match model geometry " +
                            shape_str({c.frames, c.height, c.width, c.channels}));
  TokenBatch tb = patchify(noisy, c.patch);
  tb.tokens = model_.score_tokens(tb.tokens, sigma, scene);
  return unpatchify(tb, c.height, c.width);
}

Tensor GaussianScoreModel::score(const Tensor& noisy, double sigma, int) const {
  Tensor out(noisy.shape());
  const double inv = 1.0 / (var_ + sigma * sigma);
  const bool full = mean_.shape() == noisy.shape();
  ADSM_REQUIRE(full || mean_.size() == 0, "gaussian score: mean shape differs from input");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -(noisy[i] - (full ? mean_[i] : scalar_mean_)) * inv;
  return out;
}

const char* to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::geometric: return "geometric";
    case ScheduleMode::linear: return "linear";
    case ScheduleMode::log_uniform: return "log_uniform";
  }
  return "?";
}

const char* to_string(NormMode m) { return m == NormMode::full ? "full" : "patch_mean"; }

void ScoreConfig::validate() const {
  ADSM_REQUIRE(levels >= 1, "score config: need at least one level");
  ADSM_REQUIRE(sigma_min > 0.0 && (sigma_min < sigma_max || (levels == 1 && sigma_min <= sigma_max)),
               "score config: need 0 < sigma_min < sigma_max");
  ADSM_REQUIRE(schedule != ScheduleMode::log_uniform, "score config: scoring needs a discrete ladder");
  ADSM_REQUIRE(fusion_weights.empty() || fusion_weights.size() == levels,
               "score config: fusion weights must have one entry per level");
  ADSM_REQUIRE(psnr_peak > 0.0 && mse_floor > 0.0, "score config: bad PSNR constants");
}

NoiseSchedule ScoreConfig::make_schedule() const {
  validate();
  return schedule == ScheduleMode::linear ? build_linear_schedule(sigma_min, sigma_max, levels)
                                          : build_noise_schedule(sigma_min, sigma_max, levels);
}

Tensor denoise_step(const Tensor& noisy, double sigma, const ScoreModel& model, int scene) {
  ADSM_REQUIRE(sigma > 0.0, "denoise_step: sigma must be positive");
  Tensor s = model.score(noisy, sigma, scene);
  ADSM_REQUIRE(s.shape() == noisy.shape(), "denoise_step: score shape differs from input");
  Tensor out(noisy.shape());
  const double s2 = sigma * sigma;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = noisy[i] + s2 * s[i];
  return out;
}

double psnr(const Tensor& a, const Tensor& b, double peak, double mse_floor) {
  ADSM_REQUIRE(a.shape() == b.shape(), "psnr: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  ADSM_REQUIRE(a.size() > 0, "psnr: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  const double mse = std::max(acc / static_cast<double>(a.size()), mse_floor);
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<double> LevelScores::combined(bool appearance) const {
  if (!appearance) return norm;
  std::vector<double> out(norm.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = norm[i] / std::max(psnr[i], kPsnrFloorDb);
  return out;
}

namespace {

double score_norm(const Tensor& s, const ScoreConfig& opt) {
  if (opt.norm == NormMode::full) return l2_norm(s.data());
  TokenBatch tb = patchify(s, opt.patch);
  const std::size_t width = tb.tokens.dim(1);
  double acc = 0.0;
  for (std::size_t j = 0; j < tb.count(); ++j) acc += l2_norm(tb.tokens.data().subspan(j * width, width));
  return acc / static_cast<double>(tb.count());
}

}  // namespace

LevelScores autoregressive_score(const Tensor& window, const ScoreModel& model, std::span<const double> levels,
                                 int scene, Rng& rng, const ScoreConfig& opt) {
  check_window(window, "autoregressive_score");
  ADSM_REQUIRE(!levels.empty(), "autoregressive_score: empty noise schedule");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    ADSM_REQUIRE(levels[i] > 0.0, "autoregressive_score: noise levels must be positive");
    ADSM_REQUIRE(i == 0 || levels[i] > levels[i - 1],
                 "autoregressive_score: noise levels must be strictly ascending");
  }
  LevelScores out;
  Tensor current = window;
  Tensor shared;
  if (opt.reuse_noise) shared = standard_normal(window.shape(), rng);
  for (double sigma : levels) {
    const Tensor eps = opt.reuse_noise ? shared : standard_normal(window.shape(), rng);
    const Tensor& base = opt.autoregressive ? current : window;
    Tensor noisy(window.shape());
    for (std::size_t k = 0; k < noisy.size(); ++k) noisy[k] = base[k] + sigma * eps[k];
    Tensor s = model.score(noisy, sigma, scene);
    ADSM_REQUIRE(s.shape() == noisy.shape(), "autoregressive_score: score shape differs from input");
    Tensor denoised(window.shape());
    const double s2 = sigma * sigma;
    for (std::size_t k = 0; k < denoised.size(); ++k) denoised[k] = noisy[k] + s2 * s[k];

    const double nrm = score_norm(s, opt);
    const double p = psnr(denoised, window, opt.psnr_peak, opt.mse_floor);
    out.norm.push_back(nrm);
    out.psnr.push_back(p);
    out.scores.push_back(opt.appearance ? nrm / std::max(p, kPsnrFloorDb) : nrm);
    double drift = 0.0;
    for (std::size_t k = 0; k < denoised.size(); ++k) drift += (denoised[k] - window[k]) * (denoised[k] - window[k]);
    out.drift.push_back(std::sqrt(drift));
    if (opt.autoregressive) current = std::move(denoised);
  }
  return out;
}

std::vector<double> clip_max_aggregate(std::span<const double> window_scores, std::span<const std::size_t> starts,
                                       std::size_t covered_frames, std::size_t clip_frames) {
  ADSM_REQUIRE(clip_frames > 0, "clip_max_aggregate: clip length must be positive");
  ADSM_REQUIRE(window_scores.size() == starts.size(), "clip_max_aggregate: one score per window start");
  const std::size_t clips = (covered_frames + clip_frames - 1) / clip_frames;
  std::vector<double> out(clips, 0.0);
  std::vector<bool> seen(clips, false);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::size_t c = starts[k] / clip_frames;
    ADSM_REQUIRE(c < clips, "clip_max_aggregate: window start beyond the covered frames");
    out[c] = seen[c] ? std::max(out[c], window_scores[k]) : window_scores[k];
    seen[c] = true;
  }
  for (std::size_t c = 0; c < clips; ++c)
    if (!seen[c]) out[c] = c == 0 ? 0.0 : out[c - 1];
  return out;
}

std::vector<double> expand_clips(std::span<const double> clip_scores, std::size_t covered_frames,
                                 std::size_t clip_frames) {
  ADSM_REQUIRE(clip_frames > 0, "expand_clips: clip length must be positive");
  ADSM_REQUIRE(clip_scores.size() * clip_frames >= covered_frames, "expand_clips: too few clips");
  std::vector<double> out(covered_frames);
  for (std::size_t f = 0; f < covered_frames; ++f) out[f] = clip_scores[f / clip_frames];
  return out;
}

std::vector<double> normalize_scores(std::span<const double> series) {
  ADSM_REQUIRE(!series.empty(), "normalize_scores: empty series");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  const double mn = *lo, range = *hi - *lo;
  std::vector<double> out(series.size(), 0.0);
  if (range > 0.0)
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = std::clamp((series[i] - mn) / range, 0.0, 1.0);
  return out;
}

std::vector<double> fuse_levels(const std::vector<std::vector<double>>& levels, std::span<const double> weights) {
  ADSM_REQUIRE(!levels.empty(), "fuse_levels: no levels");
  const std::size_t L = levels.size(), T = levels.front().size();
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(L, 1.0 / static_cast<double>(L));
  ADSM_REQUIRE(w.size() == L, "fuse_levels: one weight per level required");
  double total = 0.0;
  for (double x : w) {
    ADSM_REQUIRE(x >= 0.0, "fuse_levels: weights must be non-negative");
    total += x;
  }
  ADSM_REQUIRE(std::abs(total - 1.0) <= 1e-9, "fuse_levels: weights must sum to 1");
  std::vector<double> out(T, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    ADSM_REQUIRE(levels[i].size() == T, "fuse_levels: level series lengths differ");
    for (std::size_t t = 0; t < T; ++t) out[t] += w[i] * levels[i][t];
  }
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

std::vector<double> finalize_indicator(const VideoScores& vs, bool appearance, std::span<const double> weights,
                                       std::size_t clip_frames) {
  ADSM_REQUIRE(!vs.windows.empty(), "finalize_indicator: no scored windows");
  const std::size_t T = clip_frames == 0 ? 2 * vs.window : clip_frames;
  ADSM_REQUIRE(T >= vs.window, "clip length must be at least the window length");
  const std::size_t L = vs.windows.front().norm.size();
  std::vector<std::vector<double>> per_window;
  for (const auto& w : vs.windows) per_window.push_back(w.combined(appearance));
  std::vector<std::vector<double>> normalized(L);
  std::vector<double> series(vs.windows.size());
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t k = 0; k < per_window.size(); ++k) series[k] = per_window[k][i];
    auto clips = clip_max_aggregate(series, vs.starts, vs.covered, T);
    normalized[i] = normalize_scores(expand_clips(clips, vs.covered, T));
  }
  return fuse_levels(normalized, weights);
}

Rng window_rng(std::uint64_t seed, const std::string& video_id, std::size_t t) {
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(video_id.data()), static_cast<uInt>(video_id.size()));
  return derive_rng(seed, {0x5343ull, static_cast<std::uint64_t>(crc), t});
}

VideoScores score_video(const VideoSequence& video, const ScoreModel& model, const ScoreConfig& config,
                        std::size_t window) {
  config.validate();
  ADSM_REQUIRE(window >= 1, "score_video: window must be positive");
  if (video.length() < window)
    throw DataError("video too short: " + video.video_id + " has " + std::to_string(video.length()) +
                    " frames, the model needs " + std::to_string(window));
  const NoiseSchedule schedule = config.make_schedule();
  VideoScores vs;
  vs.video_id = video.video_id;
  vs.scene = video.scene;
  vs.length = video.length();
  vs.window = window;
  vs.starts = window_starts(video.length(), window);
  vs.covered = vs.starts.size() * window;
  for (std::size_t t : vs.starts) {
    Rng rng = window_rng(config.seed, video.video_id, t);
    vs.windows.push_back(
        autoregressive_score(extract_window(video.frames, t, window), model, schedule.levels, video.scene, rng, config));
  }
  vs.indicator = finalize_indicator(vs, config.appearance, config.fusion_weights, config.clip_frames);
  return vs;
}

namespace {

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void write_raw_scores(const std::filesystem::path& file, std::span<const VideoScores> videos) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out << "video_id,t,level,score\n";
  for (const auto& v : videos)
    for (std::size_t k = 0; k < v.windows.size(); ++k)
      for (std::size_t i = 0; i < v.windows[k].scores.size(); ++i)
        out << v.video_id << ',' << v.starts[k] << ',' << i + 1 << ',' << fmt9(v.windows[k].scores[i]) << '\n';
}

void write_final_scores(const std::filesystem::path& file, std::span<const VideoScores> videos) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out << "video_id,frame_index,indicator\n";
  for (const auto& v : videos)
    for (std::size_t f = 0; f < v.indicator.size(); ++f) out << v.video_id << ',' << f << ',' << fmt9(v.indicator[f]) << '\n';
}

std::vector<FinalScores> read_final_scores(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("video_id,frame_index,indicator", 0) != 0)
    throw DataError("missing scores_final.csv header in " + file.string());
  std::vector<FinalScores> out;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, frame, value;
    if (!std::getline(ss, id, ',') || !std::getline(ss, frame, ',') || !std::getline(ss, value))
      throw DataError("malformed score row '" + line + "' in " + file.string());
    std::size_t f = 0;
    double v = 0.0;
    try {
      f = std::stoul(frame);
      v = std::stod(value);
    } catch (const std::exception&) {
      throw DataError("malformed score row '" + line + "' in " + file.string());
    }
    auto [it, fresh] = index.emplace(id, out.size());
    if (fresh) out.push_back({id, {}});
    auto& vec = out[it->second].indicator;
    if (f != vec.size()) throw DataError("frames out of order for " + id + " in " + file.string());
    vec.push_back(v);
  }
  return out;
}

}  // namespace adsm
