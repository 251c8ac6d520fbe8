#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adsm/ncst.hpp"
#include "adsm/optim.hpp"

namespace adsm {

struct TrainingMetadata {
  std::size_t epochs = 0;  // epochs completed
  std::vector<double> loss_history;  // mean loss per epoch
  std::uint64_t seed = 0;
  double lr0 = 0.0;
  std::size_t batch = 0;
  double clip_norm = 0.0;  // 0 = clipping disabled
  bool motion_weights = true;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  std::size_t windows = 0;  // training windows per epoch
};

struct NcstCheckpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  NcstConfig config;
  std::vector<Parameter> params;
  std::optional<AdamaxState> optimizer;
  TrainingMetadata meta;

  static NcstCheckpoint from_model(const NcstModel& model);
  /// Rebuilds the model and copies the stored parameters into it.
  NcstModel to_model() const;
};

/// Container layout: "ADSMCKPT", u32 version, u64 config fingerprint,
/// u32-length config text, u32-length metadata JSON, the named-tensor
/// table, an optional Adamax section, and a trailing crc32 of all the
/// preceding bytes.
void save_checkpoint(const NcstCheckpoint& ckpt, const std::filesystem::path& path);
std::string serialize_checkpoint(const NcstCheckpoint& ckpt);

/// Throws IncompatibleError on a version mismatch or when `expected` is given
/// and its fingerprint differs, CorruptionError on a checksum failure.
NcstCheckpoint load_checkpoint(const std::filesystem::path& path,
                               const NcstConfig* expected = nullptr);
NcstCheckpoint deserialize_checkpoint(const std::string& bytes, const NcstConfig* expected = nullptr);

/// Bytes of the named-tensor table alone.
std::string parameter_payload(const NcstCheckpoint& ckpt);

}  // namespace adsm
