#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "adsm/ncst.hpp"
#include "adsm/scoring.hpp"
#include "adsm/synthetic.hpp"
#include "adsm/training.hpp"

namespace adsm {

// Flat `key = value` text. '#' starts a comment; blank lines are ignored;
// a repeated key keeps its last value.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text, const std::string& origin = "<config>");
KeyValues read_key_values(const std::filesystem::path& file);
std::string format_key_values(const KeyValues& kv);

/// Typed reads over a KeyValues map that remember which keys were used.
/// Malformed values throw DataError naming the key.
class ConfigReader {
 public:
  explicit ConfigReader(const KeyValues& kv) : kv_(kv) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::size_t size(const std::string& key, std::size_t fallback);
  std::uint64_t u64(const std::string& key, std::uint64_t fallback);
  int integer(const std::string& key, int fallback);
  double number(const std::string& key, double fallback);
  bool flag(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  /// Comma-separated numbers.
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback);

  /// Keys present in the map that no read touched.
  std::vector<std::string> unused() const;

 private:
  const std::string* lookup(const std::string& key);
  const KeyValues& kv_;
  std::set<std::string> used_;
};

void apply_config(ConfigReader& r, NcstConfig& c);
void apply_config(ConfigReader& r, SyntheticDatasetSpec& s);
void apply_config(ConfigReader& r, TrainConfig& t);  // includes the model keys
void apply_config(ConfigReader& r, ScoreConfig& s);

KeyValues to_key_values(const NcstConfig& c);
KeyValues to_key_values(const SyntheticDatasetSpec& s);
KeyValues to_key_values(const TrainConfig& t);
KeyValues to_key_values(const ScoreConfig& s);

/// Parses NcstConfig::canonical() output.
NcstConfig ncst_config_from_canonical(std::string_view text);

/// Named presets ("tiny", "ablation"); unknown names throw ContractViolation.
KeyValues preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace adsm
