#include "adsm/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "adsm/errors.hpp"

namespace adsm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw DataError("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

}  // namespace

KeyValues parse_key_values(std::string_view text, const std::string& origin) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw DataError(origin + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), file.string());
}

std::string format_key_values(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

const std::string* ConfigReader::lookup(const std::string& key) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::size_t ConfigReader::size(const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(u64(key, fallback));
}

std::uint64_t ConfigReader::u64(const std::string& key, std::uint64_t fallback) {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument(*v);
    const unsigned long long x = std::stoull(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return x;
  } catch (const std::exception&) {
    bad_value(key, *v, "a non-negative integer");
  }
}

int ConfigReader::integer(const std::string& key, int fallback) {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const int x = std::stoi(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return x;
  } catch (const std::exception&) {
    bad_value(key, *v, "an integer");
  }
}

double ConfigReader::number(const std::string& key, double fallback) {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double x = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return x;
  } catch (const std::exception&) {
    bad_value(key, *v, "a number");
  }
}

bool ConfigReader::flag(const std::string& key, bool fallback) {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "on" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "off" || *v == "no") return false;
  bad_value(key, *v, "a boolean");
}

std::string ConfigReader::text(const std::string& key, const std::string& fallback) {
  const std::string* v = lookup(key);
  return v ? *v : fallback;
}

std::vector<double> ConfigReader::numbers(const std::string& key, std::vector<double> fallback) {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  std::vector<double> out;
  std::stringstream ss(*v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      bad_value(key, *v, "comma-separated numbers");
    }
  }
  return out;
}

std::vector<std::string> ConfigReader::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

void apply_config(ConfigReader& r, NcstConfig& c) {
  c.frames = r.size("frames", c.frames);
  c.height = r.size("height", c.height);
  c.width = r.size("width", c.width);
  c.channels = r.size("channels", c.channels);
  c.patch = r.size("patch", c.patch);
  c.embed = r.size("embed", c.embed);
  c.heads = r.size("heads", c.heads);
  c.blocks = r.size("blocks", c.blocks);
  c.ffn_mult = r.size("ffn_mult", c.ffn_mult);
  const std::string att = r.text("attention", to_string(c.attention));
  if (att == "joint") c.attention = AttentionLayout::joint;
  else if (att == "factorized") c.attention = AttentionLayout::factorized;
  else bad_value("attention", att, "joint or factorized");
  c.time_width = r.size("time_width", c.time_width);
  c.scene_width = r.size("scene_width", c.scene_width);
  c.scene_classes = r.size("scene_classes", c.scene_classes);
  c.scene_condition = r.flag("scene_condition", c.scene_condition);
  c.levels = r.size("levels", c.levels);
  c.sigma_min = r.number("sigma_min", c.sigma_min);
  c.sigma_max = r.number("sigma_max", c.sigma_max);
  const std::string os = r.text("output_scaling", to_string(c.output_scaling));
  if (os == "inverse_sigma") c.output_scaling = OutputScaling::inverse_sigma;
  else if (os == "none") c.output_scaling = OutputScaling::none;
  else bad_value("output_scaling", os, "inverse_sigma or none");
}

void apply_config(ConfigReader& r, SyntheticDatasetSpec& s) {
  s.scenes = r.size("scenes", s.scenes);
  s.train_videos_per_scene = r.size("train_videos_per_scene", s.train_videos_per_scene);
  s.test_videos_per_scene = r.size("test_videos_per_scene", s.test_videos_per_scene);
  s.frames = r.size("video_frames", s.frames);
  s.size = r.size("size", s.size);
  s.channels = r.size("channels", s.channels);
  s.objects = r.size("objects", s.objects);
  s.event_frames = r.size("event_frames", s.event_frames);
  auto normal = r.numbers("normal_speed", {s.normal_speed_min, s.normal_speed_max});
  auto fast = r.numbers("fast_speed", {s.fast_speed_min, s.fast_speed_max});
  if (normal.size() != 2) bad_value("normal_speed", csv(normal), "two numbers");
  if (fast.size() != 2) bad_value("fast_speed", csv(fast), "two numbers");
  s.normal_speed_min = normal[0];
  s.normal_speed_max = normal[1];
  s.fast_speed_min = fast[0];
  s.fast_speed_max = fast[1];
  auto rates = r.numbers("anomaly_rates", {s.anomaly_rates.begin(), s.anomaly_rates.end()});
  if (rates.size() != 3) bad_value("anomaly_rates", csv(rates), "three numbers scene,motion,appearance");
  s.anomaly_rates = {rates[0], rates[1], rates[2]};
  s.seed = r.u64("seed", s.seed);
}

void apply_config(ConfigReader& r, TrainConfig& t) {
  apply_config(r, t.model);
  t.epochs = r.size("epochs", t.epochs);
  t.batch = r.size("batch", t.batch);
  t.lr = r.number("lr", t.lr);
  t.sigma_min = t.model.sigma_min;
  t.sigma_max = t.model.sigma_max;
  t.seed = r.u64("seed", t.seed);
  t.data = r.text("data", t.data.string());
  t.motion_weights = r.flag("motion_weights", t.motion_weights);
  t.scene_condition = t.model.scene_condition;
  t.clip_norm = r.number("clip_norm", t.clip_norm);
}

void apply_config(ConfigReader& r, ScoreConfig& s) {
  s.levels = r.size("levels", s.levels);
  s.sigma_min = r.number("sigma_min", s.sigma_min);
  s.sigma_max = r.number("sigma_max", s.sigma_max);
  const std::string sched = r.text("schedule", to_string(s.schedule));
  if (sched == "geometric") s.schedule = ScheduleMode::geometric;
  else if (sched == "linear") s.schedule = ScheduleMode::linear;
  else bad_value("schedule", sched, "geometric or linear");
  s.clip_frames = r.size("clip_frames", s.clip_frames);
  const std::string fw = r.text("fusion_weights", "uniform");
  if (fw == "uniform") {
    s.fusion_weights.clear();
  } else {
    KeyValues tmp{{"fusion_weights", fw}};
    ConfigReader inner(tmp);
    s.fusion_weights = inner.numbers("fusion_weights", {});
  }
  s.seed = r.u64("seed", s.seed);
  s.autoregressive = r.flag("autoregressive", s.autoregressive);
  s.appearance = r.flag("appearance", s.appearance);
  s.reuse_noise = r.flag("reuse_noise", s.reuse_noise);
  const std::string norm = r.text("norm", to_string(s.norm));
  if (norm == "full") s.norm = NormMode::full;
  else if (norm == "patch_mean") s.norm = NormMode::patch_mean;
  else bad_value("norm", norm, "full or patch_mean");
  s.patch = r.size("patch", s.patch);
  s.psnr_peak = r.number("psnr_peak", s.psnr_peak);
  s.mse_floor = r.number("mse_floor", s.mse_floor);
}

KeyValues to_key_values(const NcstConfig& c) { return parse_key_values(c.canonical()); }

KeyValues to_key_values(const SyntheticDatasetSpec& s) {
  return {{"scenes", std::to_string(s.scenes)},
          {"train_videos_per_scene", std::to_string(s.train_videos_per_scene)},
          {"test_videos_per_scene", std::to_string(s.test_videos_per_scene)},
          {"video_frames", std::to_string(s.frames)},
          {"size", std::to_string(s.size)},
          {"channels", std::to_string(s.channels)},
          {"objects", std::to_string(s.objects)},
          {"event_frames", std::to_string(s.event_frames)},
          {"normal_speed", csv({s.normal_speed_min, s.normal_speed_max})},
          {"fast_speed", csv({s.fast_speed_min, s.fast_speed_max})},
          {"anomaly_rates", csv({s.anomaly_rates[0], s.anomaly_rates[1], s.anomaly_rates[2]})},
          {"seed", std::to_string(s.seed)}};
}

KeyValues to_key_values(const TrainConfig& t) {
  KeyValues kv = to_key_values(t.model);
  kv["epochs"] = std::to_string(t.epochs);
  kv["batch"] = std::to_string(t.batch);
  kv["lr"] = num(t.lr);
  kv["sigma_min"] = num(t.sigma_min);
  kv["sigma_max"] = num(t.sigma_max);
  kv["seed"] = std::to_string(t.seed);
  kv["data"] = t.data.string();
  kv["motion_weights"] = t.motion_weights ? "1" : "0";
  kv["scene_condition"] = t.scene_condition ? "1" : "0";
  kv["clip_norm"] = num(t.clip_norm);
  return kv;
}

KeyValues to_key_values(const ScoreConfig& s) {
  return {{"levels", std::to_string(s.levels)},
          {"sigma_min", num(s.sigma_min)},
          {"sigma_max", num(s.sigma_max)},
          {"schedule", to_string(s.schedule)},
          {"clip_frames", std::to_string(s.clip_frames)},
          {"fusion_weights", s.fusion_weights.empty() ? "uniform" : csv(s.fusion_weights)},
          {"seed", std::to_string(s.seed)},
          {"autoregressive", s.autoregressive ? "1" : "0"},
          {"appearance", s.appearance ? "1" : "0"},
          {"reuse_noise", s.reuse_noise ? "1" : "0"},
          {"norm", to_string(s.norm)},
          {"patch", std::to_string(s.patch)},
          {"psnr_peak", num(s.psnr_peak)},
          {"mse_floor", num(s.mse_floor)}};
}

NcstConfig ncst_config_from_canonical(std::string_view text) {
  KeyValues kv = parse_key_values(text, "<model config>");
  ConfigReader r(kv);
  NcstConfig c;
  apply_config(r, c);
  if (auto extra = r.unused(); !extra.empty()) throw DataError("unknown model config key '" + extra.front() + "'");
  return c;
}

std::vector<std::string> preset_names() { return {"tiny", "ablation"}; }

KeyValues preset(std::string_view name) {
  // Shared desk-scale geometry: 8-frame windows of 32x32 RGB in 8x8 patches.
  KeyValues kv{
      {"frames", "8"},        {"height", "32"},        {"width", "32"},         {"size", "32"},
      {"channels", "3"},      {"patch", "8"},          {"embed", "192"},        {"heads", "4"},
      {"blocks", "2"},        {"ffn_mult", "2"},       {"attention", "joint"},  {"time_width", "64"},
      {"scene_width", "64"},  {"levels", "20"},        {"sigma_min", "0.001"},  {"sigma_max", "1"},
      {"output_scaling", "inverse_sigma"},             {"video_frames", "32"},  {"objects", "2"},
      {"event_frames", "16"}, {"anomaly_rates", "0.1,0.1,0.1"},                 {"seed", "0"},
      {"epochs", "1"},        {"batch", "2"},          {"lr", "0.01"},          {"clip_norm", "1"},
      {"schedule", "geometric"}};
  if (name == "tiny") {
    kv["scenes"] = "2";
    kv["scene_classes"] = "2";
    kv["train_videos_per_scene"] = "5";
    kv["test_videos_per_scene"] = "5";
    return kv;
  }
  if (name == "ablation") {
    kv["scenes"] = "3";
    kv["scene_classes"] = "3";
    kv["train_videos_per_scene"] = "6";
    kv["test_videos_per_scene"] = "8";
    kv["video_frames"] = "64";
    kv["epochs"] = "10";
    return kv;
  }
  throw ContractViolation("unknown preset '" + std::string(name) + "'");
}

}  // namespace adsm
