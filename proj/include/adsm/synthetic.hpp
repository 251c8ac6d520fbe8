#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adsm/video.hpp"

namespace adsm {

enum class AnomalyKind { scene, motion, appearance };
const char* to_string(AnomalyKind k);

/// Parameters of the synthetic multi-scene benchmark.
///
/// Every scene shares the same backdrop and object catalog; scenes differ only
/// in which motion direction is normal, so a scene's rules are carried by its
/// label rather than by its pixels. Test videos are cut into fixed segments of
/// `event_frames`; each segment independently hosts at most one anomaly.
struct SyntheticDatasetSpec {
  std::size_t scenes = 2;
  std::size_t train_videos_per_scene = 5;
  std::size_t test_videos_per_scene = 5;
  std::size_t frames = 32;
  std::size_t size = 32;  // frame height and width
  std::size_t channels = 3;
  std::size_t objects = 2;
  std::size_t event_frames = 16;
  double normal_speed_min = 0.6;
  double normal_speed_max = 1.4;
  double fast_speed_min = 2.8;
  double fast_speed_max = 4.0;
  // per-segment probabilities of a scene / motion / appearance anomaly
  std::array<double, 3> anomaly_rates{0.1, 0.1, 0.1};
  std::uint64_t seed = 0;

  void validate() const;
};

struct InjectedEvent {
  std::string video_id;
  AnomalyKind kind = AnomalyKind::scene;
  std::size_t start = 0;  // first frame
  std::size_t end = 0;    // one past the last frame
};

struct SyntheticDataset {
  std::vector<VideoSequence> train;
  std::vector<VideoSequence> test;
  std::vector<InjectedEvent> events;
};

SyntheticDataset generate_synthetic_dataset(const SyntheticDatasetSpec& spec);

/// Direction family that scene `scene` treats as normal.
int scene_motion_pattern(std::size_t scene);

}  // namespace adsm
