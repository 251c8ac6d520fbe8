#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "../support/tempdir.hpp"
#include "adsm/dataset_io.hpp"
#include "adsm/errors.hpp"
#include "adsm/synthetic.hpp"

using namespace adsm;
using adsm::testing::TempDir;

namespace {

SyntheticDatasetSpec small_spec() {
  SyntheticDatasetSpec s;
  s.scenes = 2;
  s.train_videos_per_scene = 2;
  s.test_videos_per_scene = 3;
  s.frames = 24;
  s.size = 16;
  s.event_frames = 8;
  s.anomaly_rates = {0.2, 0.2, 0.2};
  s.seed = 4;
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const auto a = generate_synthetic_dataset(small_spec());
  const auto b = generate_synthetic_dataset(small_spec());
  auto spec = small_spec();
  spec.seed = 5;
  const auto c = generate_synthetic_dataset(spec);
  REQUIRE(a.test.size() == 6);
  CHECK(a.test[3].frames == b.test[3].frames);
  CHECK(a.test[3].frame_labels == b.test[3].frame_labels);
  CHECK_FALSE(a.test[3].frames == c.test[3].frames);
}

TEST_CASE("videos have the requested geometry and quantized pixels") {
  const auto ds = generate_synthetic_dataset(small_spec());
  CHECK(ds.train.size() == 4);
  for (const auto& v : ds.train) {
    CHECK(v.frames.shape() == Shape{24, 16, 16, 3});
    CHECK(v.frame_labels.empty());
    for (double p : v.frames.data()) {
      REQUIRE(p >= 0.0);
      REQUIRE(p <= 1.0);
      REQUIRE(std::abs(p * 255.0 - std::round(p * 255.0)) < 1e-9);
    }
  }
  CHECK(ds.train[0].scene == 0);
  CHECK(ds.train[3].scene == 1);
}

TEST_CASE("labels mark exactly the injected event frames") {
  const auto ds = generate_synthetic_dataset(small_spec());
  for (const auto& v : ds.test) {
    std::vector<std::uint8_t> expected(v.length(), 0);
    for (const auto& e : ds.events)
      if (e.video_id == v.video_id)
        for (std::size_t f = e.start; f < e.end; ++f) expected[f] = 1;
    CHECK(v.frame_labels == expected);
  }
  CHECK_FALSE(ds.events.empty());
}

TEST_CASE("zero rates give all-normal test videos") {
  auto spec = small_spec();
  spec.anomaly_rates = {0, 0, 0};
  const auto ds = generate_synthetic_dataset(spec);
  CHECK(ds.events.empty());
  for (const auto& v : ds.test) CHECK(std::count(v.frame_labels.begin(), v.frame_labels.end(), 1) == 0);
}

TEST_CASE("a certain motion anomaly labels every segment") {
  auto spec = small_spec();
  spec.anomaly_rates = {0, 1, 0};
  const auto ds = generate_synthetic_dataset(spec);
  CHECK(ds.events.size() == 6 * 3);
  for (const auto& e : ds.events) CHECK(e.kind == AnomalyKind::motion);
}

TEST_CASE("invalid specs are rejected") {
  auto spec = small_spec();
  spec.anomaly_rates = {0.5, 0.4, 0.3};
  CHECK_THROWS_AS(generate_synthetic_dataset(spec), ContractViolation);
  spec = small_spec();
  spec.anomaly_rates[1] = -0.1;
  CHECK_THROWS_AS(spec.validate(), ContractViolation);
  spec = small_spec();
  spec.channels = 2;
  CHECK_THROWS_AS(spec.validate(), ContractViolation);
}

TEST_CASE("datasets survive a disk round trip") {
  TempDir dir;
  const auto ds = generate_synthetic_dataset(small_spec());
  write_dataset(dir.path(), ds);
  CHECK(std::filesystem::exists(dir / "train/scenes.csv"));
  CHECK(std::filesystem::exists(dir / "test/labels.csv"));
  CHECK(std::filesystem::exists(dir / "test/events.csv"));
  const auto test = read_split(dir / "test");
  REQUIRE(test.size() == ds.test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    CHECK(test[i].video_id == ds.test[i].video_id);
    CHECK(test[i].scene == ds.test[i].scene);
    CHECK(test[i].frames == ds.test[i].frames);
    CHECK(test[i].frame_labels == ds.test[i].frame_labels);
  }
  const auto labels = read_labels_csv(dir / "test/labels.csv");
  CHECK(labels.size() == ds.test.size());
}

TEST_CASE("video files keep float payloads exactly") {
  TempDir dir;
  Tensor t(Shape{2, 3, 4, 1});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::sin(static_cast<double>(i));
  write_video_file(dir / "a.adsv", t, PixelType::f64);
  CHECK(read_video_file(dir / "a.adsv") == t);
}

TEST_CASE("corrupt or missing files raise data errors") {
  TempDir dir;
  {
    std::ofstream(dir / "bad.adsv") << "not a video";
  }
  CHECK_THROWS_AS(read_video_file(dir / "bad.adsv"), DataError);
  CHECK_THROWS_AS(read_video_file(dir / "missing.adsv"), DataError);
  CHECK_THROWS_AS(read_split(dir / "nothing"), DataError);
}
