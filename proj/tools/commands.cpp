#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "adsm/ablation.hpp"
#include "adsm/checkpoint.hpp"
#include "adsm/config.hpp"
#include "adsm/dataset_io.hpp"
#include "adsm/errors.hpp"
#include "adsm/evaluation.hpp"
#include "adsm/mixture.hpp"
#include "adsm/scoring.hpp"
#include "adsm/svg.hpp"
#include "adsm/synthetic.hpp"
#include "adsm/training.hpp"
#include "manifest.hpp"

namespace adsm::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Options shared by every command that reads configuration.
struct ConfigSource {
  std::string preset = "tiny";
  std::string file;
  std::vector<std::string> set;
};

void add_config_options(CLI::App* cmd, ConfigSource& src, const std::string& default_preset = "tiny") {
  src.preset = default_preset;
  cmd->add_option("--preset", src.preset, "Base preset (" + [] {
    std::string s;
    for (const auto& n : preset_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }() + ")")->capture_default_str();
  cmd->add_option("--config", src.file, "key = value config file; flags override its keys")->check(CLI::ExistingFile);
  cmd->add_option("--set", src.set, "Override one config key (key=value), repeatable");
}

// Every key some command understands, so typos in config files surface.
void reject_unknown_keys(const KeyValues& kv) {
  ConfigReader r(kv);
  NcstConfig m;
  SyntheticDatasetSpec d;
  TrainConfig t;
  ScoreConfig s;
  apply_config(r, m);
  apply_config(r, d);
  apply_config(r, t);
  apply_config(r, s);
  const auto unused = r.unused();
  if (!unused.empty()) throw UsageError("unknown config key '" + unused.front() + "'");
}

/// preset < config file < --set < explicit flags
KeyValues resolve_config(const ConfigSource& src, const KeyValues& flags) {
  KeyValues kv;
  try {
    kv = preset(src.preset);
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }
  if (!src.file.empty())
    for (const auto& [k, v] : read_key_values(src.file)) kv[k] = v;
  for (const auto& item : src.set) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + item + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  for (const auto& [k, v] : flags) kv[k] = v;
  reject_unknown_keys(kv);
  return kv;
}

template <class T>
void flag_value(KeyValues& flags, CLI::Option* opt, const std::string& key, const T& value) {
  if (opt->count() == 0) return;
  if constexpr (std::is_same_v<T, double>) flags[key] = fmt(value);
  else if constexpr (std::is_same_v<T, std::string>) flags[key] = value;
  else flags[key] = std::to_string(value);
}

// Refuses upstream artifacts that changed since the manifest next to them was written.
void verify_upstream(const fs::path& artifact_path, const fs::path& manifest_path) {
  if (!fs::exists(artifact_path)) throw DataError("missing input " + artifact_path.string());
  if (!fs::exists(manifest_path)) return;
  const RunManifest m = read_manifest(manifest_path);
  const std::string sum = checksum_path(artifact_path);
  for (const auto& o : m.outputs)
    if (o.checksum == sum) return;
  throw DataError(artifact_path.string() + " does not match the checksum recorded in " + manifest_path.string());
}

fs::path sidecar_manifest(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

RunManifest start_manifest(const std::string& command, const std::vector<std::string>& argv, const KeyValues& kv) {
  RunManifest m;
  m.command = command;
  m.argv = argv;
  m.config = kv;
  auto it = kv.find("seed");
  m.seed = it == kv.end() ? 0 : std::stoull(it->second);
  m.version = ADSM_VERSION;
  m.notes["cwd"] = fs::current_path().string();
  return m;
}

std::map<std::string, std::vector<std::uint8_t>> labels_by_video(const fs::path& file) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (auto& [id, labels] : read_labels_csv(file)) out[id] = std::move(labels);
  return out;
}

// Labels of the frames that received a score.
std::vector<std::uint8_t> covered_labels(const std::map<std::string, std::vector<std::uint8_t>>& labels,
                                         const FinalScores& fs_) {
  auto it = labels.find(fs_.video_id);
  if (it == labels.end()) throw DataError("no labels for video " + fs_.video_id);
  if (it->second.size() < fs_.indicator.size())
    throw DataError("video " + fs_.video_id + " has " + std::to_string(it->second.size()) + " labels but " +
                    std::to_string(fs_.indicator.size()) + " scored frames");
  return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(fs_.indicator.size())};
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  ConfigSource src;
  std::size_t scenes = 0, videos = 0, frames = 0, size = 0;
  std::vector<double> rates;
  std::uint64_t seed = 0;
  std::string out;
  CLI::Option *o_scenes{}, *o_videos{}, *o_frames{}, *o_size{}, *o_rates{}, *o_seed{};
};

int cmd_generate(const GenerateArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  KeyValues flags;
  flag_value(flags, a.o_scenes, "scenes", a.scenes);
  if (a.o_scenes->count()) flags["scene_classes"] = std::to_string(a.scenes);
  flag_value(flags, a.o_videos, "train_videos_per_scene", a.videos);
  flag_value(flags, a.o_videos, "test_videos_per_scene", a.videos);
  flag_value(flags, a.o_frames, "video_frames", a.frames);
  flag_value(flags, a.o_size, "size", a.size);
  if (a.o_rates->count()) flags["anomaly_rates"] = fmt(a.rates[0]) + "," + fmt(a.rates[1]) + "," + fmt(a.rates[2]);
  flag_value(flags, a.o_seed, "seed", a.seed);
  const KeyValues kv = resolve_config(a.src, flags);

  ConfigReader r(kv);
  SyntheticDatasetSpec spec;
  apply_config(r, spec);
  spec.validate();
  const SyntheticDataset ds = generate_synthetic_dataset(spec);

  const fs::path out = a.out;
  fs::create_directories(out);
  fs::remove_all(out / "train");
  fs::remove_all(out / "test");
  write_dataset(out, ds);

  RunManifest m = start_manifest("generate", argv, to_key_values(spec));
  m.outputs.push_back(artifact(out));
  m.timings["total"] = seconds_since(t0);
  write_manifest(m, out / "manifest.json");
  std::cout << "wrote " << ds.train.size() << " train and " << ds.test.size() << " test videos ("
            << ds.events.size() << " injected events) to " << out.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  ConfigSource src;
  std::string data, out;
  std::uint64_t seed = 0;
  std::size_t epochs = 0, batch = 0;
  double lr = 0.0;
  bool no_motion = false, no_scene = false;
  CLI::Option *o_seed{}, *o_epochs{}, *o_batch{}, *o_lr{};
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  KeyValues flags;
  flags["data"] = a.data;
  flag_value(flags, a.o_seed, "seed", a.seed);
  flag_value(flags, a.o_epochs, "epochs", a.epochs);
  flag_value(flags, a.o_batch, "batch", a.batch);
  flag_value(flags, a.o_lr, "lr", a.lr);
  if (a.no_motion) flags["motion_weights"] = "0";
  if (a.no_scene) flags["scene_condition"] = "0";
  const KeyValues kv = resolve_config(a.src, flags);

  ConfigReader r(kv);
  TrainConfig tc;
  apply_config(r, tc);
  tc.validate();
  const fs::path data = tc.data;
  verify_upstream(data, data / "manifest.json");

  NcstCheckpoint ckpt = train(tc, [&](const EpochReport& e) {
    std::cerr << "epoch " << e.epoch << "/" << tc.epochs << "  loss " << fmt(e.mean_loss) << "  lr "
              << fmt(e.lr) << "  (" << fmt(e.seconds) << " s)\n";
  });
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(ckpt, out);

  RunManifest m = start_manifest("train", argv, kv);
  m.inputs.push_back(artifact(data));
  m.outputs.push_back(artifact(out));
  m.notes["model_fingerprint"] = fingerprint_hex(ckpt.config.fingerprint());
  m.notes["first_epoch_loss"] = fmt(ckpt.meta.loss_history.front());
  m.notes["final_epoch_loss"] = fmt(ckpt.meta.loss_history.back());
  m.timings["total"] = seconds_since(t0);
  write_manifest(m, sidecar_manifest(out));
  std::cout << "saved checkpoint " << out.string() << " (fingerprint " << m.notes["model_fingerprint"]
            << ", final loss " << m.notes["final_epoch_loss"] << ")\n";
  return kExitOk;
}

// ------------------------------------------------------------------- score

struct ScoreArgs {
  ConfigSource src;
  std::string ckpt, data, out, split = "test";
  std::size_t levels = 0, clip_frames = 0;
  double sigma_min = 0.0, sigma_max = 0.0;
  std::string schedule, fusion, norm;
  std::uint64_t seed = 0;
  bool no_autoregressive = false, no_appearance = false, reuse_noise = false;
  CLI::Option *o_levels{}, *o_smin{}, *o_smax{}, *o_schedule{}, *o_clip{}, *o_fusion{}, *o_seed{}, *o_norm{};
};

int cmd_score(const ScoreArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  KeyValues flags;
  flag_value(flags, a.o_levels, "levels", a.levels);
  flag_value(flags, a.o_smin, "sigma_min", a.sigma_min);
  flag_value(flags, a.o_smax, "sigma_max", a.sigma_max);
  flag_value(flags, a.o_schedule, "schedule", a.schedule);
  flag_value(flags, a.o_clip, "clip_frames", a.clip_frames);
  flag_value(flags, a.o_fusion, "fusion_weights", a.fusion);
  flag_value(flags, a.o_seed, "seed", a.seed);
  flag_value(flags, a.o_norm, "norm", a.norm);
  if (a.no_autoregressive) flags["autoregressive"] = "0";
  if (a.no_appearance) flags["appearance"] = "0";
  if (a.reuse_noise) flags["reuse_noise"] = "1";
  const KeyValues kv = resolve_config(a.src, flags);

  const fs::path ckpt_path = a.ckpt, data = a.data, out = a.out;
  verify_upstream(ckpt_path, sidecar_manifest(ckpt_path));
  verify_upstream(data, data / "manifest.json");
  const NcstCheckpoint ckpt = load_checkpoint(ckpt_path);
  const NcstModel model = ckpt.to_model();
  const NcstConfig& mc = model.config();

  ConfigReader r(kv);
  ScoreConfig sc;
  apply_config(r, sc);
  sc.patch = mc.patch;
  sc.validate();
  if (sc.sigma_min < mc.sigma_min * (1 - 1e-12) || sc.sigma_max > mc.sigma_max * (1 + 1e-12))
    throw IncompatibleError("scoring ladder [" + fmt(sc.sigma_min) + ", " + fmt(sc.sigma_max) +
                            "] leaves the checkpoint's trained range [" + fmt(mc.sigma_min) + ", " +
                            fmt(mc.sigma_max) + "]");

  const std::vector<VideoSequence> videos = read_split(data / a.split);
  if (videos.empty()) throw DataError("no videos in " + (data / a.split).string());
  for (const auto& v : videos) check_geometry(mc, v);

  const NcstScoreModel scorer(model);
  std::vector<VideoScores> scored;
  for (const auto& v : videos) {
    const auto tv = Clock::now();
    scored.push_back(score_video(v, scorer, sc, mc.frames));
    std::cerr << "scored " << v.video_id << " (" << scored.back().windows.size() << " windows, "
              << fmt(seconds_since(tv)) << " s)\n";
  }
  fs::create_directories(out);
  write_raw_scores(out / "scores_raw.csv", scored);
  write_final_scores(out / "scores_final.csv", scored);

  KeyValues recorded = to_key_values(sc);
  recorded["split"] = a.split;
  RunManifest m = start_manifest("score", argv, recorded);
  m.inputs.push_back(artifact(ckpt_path));
  m.inputs.push_back(artifact(data));
  m.outputs.push_back(artifact(out / "scores_raw.csv"));
  m.outputs.push_back(artifact(out / "scores_final.csv"));
  m.outputs.push_back(artifact(out));
  m.notes["model_fingerprint"] = fingerprint_hex(mc.fingerprint());
  m.timings["total"] = seconds_since(t0);
  write_manifest(m, out / "manifest.json");
  std::cout << "scored " << scored.size() << " videos into " << out.string() << "\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string scores, labels, out, variant = "full";
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  const fs::path scores_dir = a.scores, labels_file = a.labels, out = a.out;
  verify_upstream(scores_dir / "scores_final.csv", scores_dir / "manifest.json");
  const auto finals = read_final_scores(scores_dir / "scores_final.csv");
  const auto labels = labels_by_video(labels_file);

  std::vector<LabeledVideo> videos;
  for (const auto& f : finals) videos.push_back({f.video_id, f.indicator, covered_labels(labels, f)});
  AblationRow row;
  row.variant = AblationVariant{a.variant.c_str(), true, true, true, true};
  row.present = true;
  row.micro_auc = micro_auc(videos);
  const MacroAuc macro = macro_auc(videos);
  row.macro_auc = macro.value;
  row.excluded = macro.excluded;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_ablation_report(out, std::span<const AblationRow>(&row, 1));

  RunManifest m = start_manifest("eval", argv, {{"variant", a.variant}});
  m.inputs.push_back(artifact(scores_dir / "scores_final.csv"));
  m.inputs.push_back(artifact(labels_file));
  m.outputs.push_back(artifact(out));
  m.timings["total"] = seconds_since(t0);
  write_manifest(m, sidecar_manifest(out));
  std::cout << a.variant << ": micro AUC " << fmt(row.micro_auc) << ", macro AUC " << fmt(row.macro_auc) << " over "
            << macro.evaluated.size() << " videos (" << macro.excluded.size() << " single-class excluded)\n";
  return kExitOk;
}

// -------------------------------------------------------------- demo-modes

struct DemoArgs {
  std::string mixture = "0.95:0:0:1;0.05:4:0:1";
  std::vector<double> grid{6.0, 121.0};
  std::vector<double> center;
  std::string out;
};

int cmd_demo_modes(const DemoArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  GaussianMixture2D mix;
  try {
    mix = GaussianMixture2D::parse(a.mixture);
  } catch (const ContractViolation& e) {
    throw UsageError(std::string("--mixture: ") + e.what());
  }
  const double extent = a.grid[0];
  const double res_d = a.grid[1];
  if (!(extent > 0.0) || res_d < 2.0 || res_d != std::floor(res_d))
    throw UsageError("--grid expects extent > 0 and an integer resolution >= 2");
  const auto res = static_cast<std::size_t>(res_d);
  std::array<double, 2> center{0.0, 0.0};
  if (!a.center.empty()) {
    center = {a.center[0], a.center[1]};
  } else {
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (const auto& c : mix.components)
      for (int d = 0; d < 2; ++d) lo[d] = std::min(lo[d], c.mean[d]), hi[d] = std::max(hi[d], c.mean[d]);
    center = {(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2};
  }

  const auto points = square_grid(extent, res, center);
  const auto field = mixture_score_field(mix, points);
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw DataError("cannot write " + out.string());
    f << "x,y,density,log_density,score_x,score_y,score_norm\n";
    char buf[256];
    for (const auto& p : field) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", p.x[0], p.x[1], p.density,
                    p.log_density, p.score[0], p.score[1], p.norm);
      f << buf;
    }
  }

  std::vector<double> heat(field.size()), density(field.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    heat[i] = std::log10(std::max(field[i].norm, 1e-6));
    density[i] = field[i].density;
    dmax = std::max(dmax, density[i]);
  }
  const std::vector<double> contour_levels{0.5 * dmax, 0.1 * dmax, 1e-2 * dmax, 1e-3 * dmax, 1e-4 * dmax};
  const fs::path svg = fs::path(out).replace_extension(".svg");
  {
    std::ofstream f(svg, std::ios::trunc);
    if (!f) throw DataError("cannot write " + svg.string());
    f << heatmap_svg("log10 score norm with density contours", heat, res, res, density, contour_levels);
  }

  // Stationary points reached from each component mean.
  std::vector<FieldPoint> modes;
  for (const auto& c : mix.components) {
    const auto x = mean_shift_mode(mix, c.mean);
    const bool seen = std::any_of(modes.begin(), modes.end(), [&](const FieldPoint& p) {
      return std::hypot(p.x[0] - x[0], p.x[1] - x[1]) < 1e-6;
    });
    if (!seen) modes.push_back(mixture_score_at(mix, x));
  }
  double global = 0.0;
  for (const auto& p : modes) global = std::max(global, p.density);

  RunManifest m = start_manifest("demo-modes", argv,
                                 {{"mixture", mix.to_spec()},
                                  {"grid", fmt(extent) + "," + std::to_string(res)},
                                  {"center", fmt(center[0]) + "," + fmt(center[1])}});
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto& p = modes[i];
    std::ostringstream os;
    os << "x=" << fmt(p.x[0]) << "," << fmt(p.x[1]) << " density_ratio=" << fmt(p.density / global)
       << " score_norm=" << fmt(p.norm);
    m.notes["mode_" + std::to_string(i)] = os.str();
    std::cout << "stationary point " << i << ": " << os.str() << "\n";
  }
  m.outputs.push_back(artifact(out));
  m.outputs.push_back(artifact(svg));
  m.timings["total"] = seconds_since(t0);
  write_manifest(m, sidecar_manifest(out));
  return kExitOk;
}

// -------------------------------------------------------------------- plot

struct PlotArgs {
  std::string scores, labels, out;
};

int cmd_plot(const PlotArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  const fs::path scores_dir = a.scores, out = a.out;
  const auto finals = read_final_scores(scores_dir / "scores_final.csv");
  const auto labels = labels_by_video(a.labels);
  fs::create_directories(out);
  RunManifest m = start_manifest("plot", argv, {});
  m.inputs.push_back(artifact(scores_dir / "scores_final.csv"));
  m.inputs.push_back(artifact(a.labels));
  for (const auto& f : finals) {
    const auto lab = covered_labels(labels, f);
    const fs::path file = out / (f.video_id + ".svg");
    std::ofstream s(file, std::ios::trunc);
    if (!s) throw DataError("cannot write " + file.string());
    s << score_curve_svg(f.video_id, f.indicator, lab);
  }
  m.outputs.push_back(artifact(out));
  m.timings["total"] = seconds_since(t0);
  write_manifest(m, out / "manifest.json");
  std::cout << "wrote " << finals.size() << " score curves to " << out.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ ablate

struct AblateArgs {
  ConfigSource src;
  std::string out;
};

int cmd_ablate(const AblateArgs& a, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  const KeyValues kv = resolve_config(a.src, {});
  AblationExperiment exp;
  {
    ConfigReader r(kv);
    apply_config(r, exp.data);
  }
  {
    ConfigReader r(kv);
    apply_config(r, exp.train);
  }
  {
    ConfigReader r(kv);
    apply_config(r, exp.score);
  }
  exp.score.patch = exp.train.model.patch;
  const AblationResult res = run_ablation_experiment(exp, [](const std::string& line) { std::cerr << line << "\n"; });

  const fs::path out = a.out;
  fs::create_directories(out);
  write_ablation_report(out / "report.csv", res.rows);
  RunManifest m = start_manifest("ablate", argv, kv);
  m.outputs.push_back(artifact(out / "report.csv"));
  for (const auto& [name, meta] : res.training)
    m.notes["loss_" + name] = fmt(meta.loss_history.front()) + " -> " + fmt(meta.loss_history.back());
  m.timings["total"] = seconds_since(t0);
  write_manifest(m, out / "manifest.json");
  for (const auto& row : res.rows)
    std::cout << row.variant.name << ": micro " << fmt(row.micro_auc) << ", macro " << fmt(row.macro_auc) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ replay

int dispatch(const std::vector<std::string>& args);

int replay(const fs::path& manifest_path) {
  const RunManifest m = read_manifest(manifest_path);
  const auto cwd = m.notes.find("cwd");
  if (cwd != m.notes.end()) fs::current_path(cwd->second);
  for (const auto& in : m.inputs)
    if (checksum_path(in.path) != in.checksum)
      throw DataError("input " + in.path + " changed since the recorded run");
  std::cerr << "replaying: adsm";
  for (const auto& s : m.argv) std::cerr << ' ' << s;
  std::cerr << "\n";
  const int code = dispatch(m.argv);
  if (code != kExitOk) return code;
  for (const auto& o : m.outputs)
    if (checksum_path(o.path) != o.checksum)
      throw DataError("replay produced different bytes for " + o.path);
  std::cout << "replay reproduced all " << m.outputs.size() << " recorded outputs\n";
  return kExitOk;
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Autoregressive denoising score matching for video anomaly detection", "adsm"};
  app.set_version_flag("--version", std::string(ADSM_VERSION));
  app.require_subcommand(0, 1);
  std::string manifest;
  std::size_t jobs = 1;
  app.add_option("--manifest", manifest, "Replay the run recorded in a manifest")->check(CLI::ExistingFile);
  app.add_option("--jobs", jobs, "Worker cap (commands run on one thread)")->check(CLI::PositiveNumber);

  GenerateArgs g;
  auto* gen = app.add_subcommand("generate", "Write a synthetic multi-scene dataset");
  add_config_options(gen, g.src);
  g.o_scenes = gen->add_option("--scenes", g.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  g.o_videos = gen->add_option("--videos-per-scene", g.videos, "Train and test videos per scene")
                   ->check(CLI::PositiveNumber);
  g.o_frames = gen->add_option("--frames", g.frames, "Frames per video")->check(CLI::PositiveNumber);
  g.o_size = gen->add_option("--size", g.size, "Frame height and width")->check(CLI::PositiveNumber);
  g.o_rates = gen->add_option("--anomaly-rates", g.rates, "Per-segment scene,motion,appearance rates")
                  ->delimiter(',')
                  ->expected(3)
                  ->check(CLI::Range(0.0, 1.0));
  g.o_seed = gen->add_option("--seed", g.seed, "Generator seed");
  gen->add_option("--out", g.out, "Output dataset directory")->required();

  TrainArgs t;
  auto* tr = app.add_subcommand("train", "Train a score model on a dataset's train split");
  add_config_options(tr, t.src);
  tr->add_option("--data", t.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", t.out, "Checkpoint path")->required();
  t.o_seed = tr->add_option("--seed", t.seed, "Training seed");
  t.o_epochs = tr->add_option("--epochs", t.epochs, "Epochs")->check(CLI::PositiveNumber);
  t.o_batch = tr->add_option("--batch", t.batch, "Batch size")->check(CLI::PositiveNumber);
  t.o_lr = tr->add_option("--lr", t.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  tr->add_flag("--no-motion-weights", t.no_motion, "Uniform token weights");
  tr->add_flag("--no-scene-condition", t.no_scene, "Drop the scene embedding");

  ScoreArgs s;
  auto* sco = app.add_subcommand("score", "Score a dataset split with a checkpoint");
  add_config_options(sco, s.src);
  sco->add_option("--ckpt", s.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  sco->add_option("--data", s.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  sco->add_option("--out", s.out, "Output directory")->required();
  sco->add_option("--split", s.split, "Split to score")->capture_default_str();
  s.o_levels = sco->add_option("--levels", s.levels, "Noise levels L")->check(CLI::PositiveNumber);
  s.o_smin = sco->add_option("--sigma-min", s.sigma_min, "Smallest noise level")->check(CLI::PositiveNumber);
  s.o_smax = sco->add_option("--sigma-max", s.sigma_max, "Largest noise level")->check(CLI::PositiveNumber);
  s.o_schedule = sco->add_option("--schedule", s.schedule, "Level spacing")
                     ->check(CLI::IsMember({"geometric", "linear"}));
  s.o_clip = sco->add_option("--clip-frames", s.clip_frames, "Frames per max-aggregation clip T");
  s.o_fusion = sco->add_option("--fusion-weights", s.fusion, "Level weights: csv or 'uniform'");
  s.o_seed = sco->add_option("--seed", s.seed, "Noise seed");
  s.o_norm = sco->add_option("--norm", s.norm, "Score norm")->check(CLI::IsMember({"full", "patch_mean"}));
  sco->add_flag("--no-autoregressive", s.no_autoregressive, "Perturb the clean window at every level");
  sco->add_flag("--no-appearance", s.no_appearance, "Skip the PSNR denominator");
  sco->add_flag("--reuse-noise", s.reuse_noise, "One noise draw shared by all levels");

  EvalArgs e;
  auto* ev = app.add_subcommand("eval", "Micro and macro frame-level AUC");
  ev->add_option("--scores", e.scores, "Score directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--labels", e.labels, "labels.csv")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", e.out, "Report CSV")->required();
  ev->add_option("--variant", e.variant, "Row name in the report")->capture_default_str();

  DemoArgs d;
  auto* dm = app.add_subcommand("demo-modes", "Score field of a 2-D Gaussian mixture");
  dm->add_option("--mixture", d.mixture, "Components w:mx:my:var separated by ';'")->capture_default_str();
  dm->add_option("--grid", d.grid, "extent,resolution")->delimiter(',')->expected(2)->capture_default_str();
  dm->add_option("--center", d.center, "Grid center x,y (default: middle of the means)")
      ->delimiter(',')
      ->expected(2);
  dm->add_option("--out", d.out, "Field CSV; the SVG is written next to it")->required();

  PlotArgs p;
  auto* pl = app.add_subcommand("plot", "SVG score curves with labeled anomalies shaded");
  pl->add_option("--scores", p.scores, "Score directory")->required()->check(CLI::ExistingDirectory);
  pl->add_option("--labels", p.labels, "labels.csv")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", p.out, "Output directory")->required();

  AblateArgs ab;
  auto* abl = app.add_subcommand("ablate", "Train and score every ablation variant");
  add_config_options(abl, ab.src, "ablation");
  abl->add_option("--out", ab.out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (!manifest.empty()) {
    if (!app.get_subcommands().empty()) throw UsageError("--manifest replays a run; give no command with it");
    return replay(manifest);
  }
  if (gen->parsed()) return cmd_generate(g, args);
  if (tr->parsed()) return cmd_train(t, args);
  if (sco->parsed()) return cmd_score(s, args);
  if (ev->parsed()) return cmd_eval(e, args);
  if (dm->parsed()) return cmd_demo_modes(d, args);
  if (pl->parsed()) return cmd_plot(p, args);
  if (abl->parsed()) return cmd_ablate(ab, args);
  std::cerr << app.help();
  return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const UsageError& e) {
    std::cerr << "adsm: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "adsm: invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericFault& e) {
    std::cerr << "adsm: numeric fault: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "adsm: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "adsm: error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace adsm::cli
