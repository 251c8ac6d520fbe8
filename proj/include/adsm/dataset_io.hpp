#pragma once

#include <filesystem>
#include <vector>

#include "adsm/synthetic.hpp"

namespace adsm {

// On-disk layout of a dataset directory:
//   <root>/train/<video_id>.adsv   <root>/train/scenes.csv
//   <root>/test/<video_id>.adsv    <root>/test/scenes.csv
//   <root>/test/labels.csv         <root>/test/events.csv
//
// A .adsv file is a 32-byte header followed by a little-endian payload:
//   bytes  0..7   magic "ADSMVID1"
//   bytes  8..11  dtype code (u32): 0 = u8 (value/255), 1 = f32, 2 = f64
//   bytes 12..15  number of dims (u32), at most 4
//   bytes 16..31  extents (4 x u32), unused trailing slots zero

enum class PixelType : std::uint32_t { u8 = 0, f32 = 1, f64 = 2 };

void write_video_file(const std::filesystem::path& path, const Tensor& frames,
                      PixelType type = PixelType::u8);
Tensor read_video_file(const std::filesystem::path& path);

void write_split(const std::filesystem::path& dir, const std::vector<VideoSequence>& videos,
                 bool with_labels);
void write_events(const std::filesystem::path& file, const std::vector<InjectedEvent>& events);
void write_dataset(const std::filesystem::path& root, const SyntheticDataset& ds);

/// Loads every video listed in <dir>/scenes.csv, with labels if present.
std::vector<VideoSequence> read_split(const std::filesystem::path& dir);

/// Per-video frame labels from a labels.csv file, keyed by video id.
std::vector<std::pair<std::string, std::vector<std::uint8_t>>> read_labels_csv(
    const std::filesystem::path& file);

}  // namespace adsm
