#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../support/tempdir.hpp"
#include "adsm/config.hpp"
#include "adsm/dataset_io.hpp"
#include "adsm/errors.hpp"
#include "adsm/training.hpp"

using namespace adsm;
using adsm::testing::TempDir;

namespace {

NcstConfig small_model() {
  NcstConfig c;
  c.frames = 4;
  c.height = 8;
  c.width = 8;
  c.channels = 1;
  c.patch = 4;
  c.embed = 16;
  c.heads = 2;
  c.blocks = 1;
  c.ffn_mult = 2;
  c.time_width = 8;
  c.scene_width = 4;
  c.scene_classes = 2;
  return c;
}

Tensor moving_square(std::size_t n, std::size_t size, std::size_t offset) {
  Tensor t(Shape{n, size, size, 1}, 0.2);
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t y = 2; y < 5; ++y)
      for (std::size_t x = 0; x < 3; ++x) t[(f * size + y) * size + (x + f + offset) % size] = 0.9;
  return t;
}

}  // namespace

TEST_CASE("dsm target is the negative scaled noise") {
  const Tensor clean = Tensor::from({0.1, 0.5});
  const Tensor noisy = Tensor::from({0.3, 0.4});
  const Tensor t = dsm_target(noisy, clean, 0.5);
  CHECK(t[0] == doctest::Approx(-0.8));
  CHECK(t[1] == doctest::Approx(0.4));
}

TEST_CASE("weighted loss vanishes at the target and matches a hand value") {
  const Tensor target(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  const std::vector<double> w{0.25, 0.75};
  CHECK(weighted_dsm_loss(Var::constant(target), target, w, 0.3).value().item() == 0.0);
  const Tensor pred(Shape{2, 2}, std::vector<double>{0, 2, 3, 6});
  // (0.09/2) * (0.25 * 1 + 0.75 * 4)
  CHECK(weighted_dsm_loss(Var::constant(pred), target, w, 0.3).value().item() ==
        doctest::Approx(0.045 * 3.25));
  CHECK_THROWS_AS(weighted_dsm_loss(Var::constant(pred), target, std::vector<double>{1.0}, 0.3),
                  ContractViolation);
}

TEST_CASE("a fresh model's loss is half the weighted noise energy") {
  const NcstConfig c = small_model();
  const NcstModel m(c, 3);
  const Tensor frames = moving_square(c.frames, c.height, 0);
  Rng rng(4);
  for (double sigma : {0.001, 0.03, 0.7}) {
    const LossTerms terms = ncst_loss(m, frames, 1, sigma, rng, true, nullptr);
    const Tensor eps = patchify(terms.noise, c.patch).tokens;
    double expected = 0.0;
    for (std::size_t j = 0; j < eps.dim(0); ++j) {
      double e2 = 0.0;
      for (std::size_t k = 0; k < eps.dim(1); ++k) e2 += eps[j * eps.dim(1) + k] * eps[j * eps.dim(1) + k];
      expected += 0.5 * terms.weights[j] * e2;
    }
    CHECK(std::abs(terms.loss.value().item() - expected) <= 1e-6 * expected);
  }
}

TEST_CASE("motion weighting on a static clip equals the unweighted loss") {
  const NcstConfig c = small_model();
  NcstModel m(c, 3);
  Rng jit(1);
  for (auto& p : m.parameters())
    for (double& v : p.value.data()) v += 0.05 * std::normal_distribution<double>()(jit);
  const Tensor frames(Shape{c.frames, c.height, c.width, 1}, 0.4);
  Rng r1(9), r2(9);
  const double a = ncst_loss(m, frames, 0, 0.1, r1, true, nullptr).loss.value().item();
  const double b = ncst_loss(m, frames, 0, 0.1, r2, false, nullptr).loss.value().item();
  CHECK(a == b);
}

TEST_CASE("training is reproducible and reduces the loss") {
  const NcstConfig c = small_model();
  std::vector<TrainWindow> windows;
  for (std::size_t k = 0; k < 6; ++k) windows.push_back({moving_square(c.frames, c.height, k), int(k % 2)});
  TrainConfig tc;
  tc.model = c;
  tc.epochs = 30;
  tc.batch = 2;
  tc.lr = 1e-2;
  tc.seed = 11;
  tc.sigma_min = c.sigma_min;
  tc.sigma_max = c.sigma_max;

  NcstModel a(c, 1), b(c, 1);
  AdamaxState sa, sb;
  const auto ma = train_model(a, windows, tc, sa);
  const auto mb = train_model(b, windows, tc, sb);
  CHECK(ma.loss_history == mb.loss_history);
  CHECK(a.parameters()[2].value == b.parameters()[2].value);
  CHECK(ma.epochs == 30);
  CHECK(sa.step == 30 * 3);
  // per-epoch losses are noisy (sigma is resampled), so compare averages
  const auto& h = ma.loss_history;
  const double first = std::accumulate(h.begin(), h.begin() + 10, 0.0);
  const double last = std::accumulate(h.end() - 10, h.end(), 0.0);
  MESSAGE("first ten epochs " << first / 10 << ", last ten " << last / 10);
  CHECK(last < first);
}

TEST_CASE("non-finite losses name the epoch and sigma") {
  const NcstConfig c = small_model();
  Tensor bad = moving_square(c.frames, c.height, 0);
  bad[5] = std::nan("");
  std::vector<TrainWindow> windows{{bad, 0}};
  TrainConfig tc;
  tc.model = c;
  tc.epochs = 2;
  tc.batch = 1;
  NcstModel m(c, 1);
  AdamaxState s;
  CHECK_THROWS_WITH_AS(train_model(m, windows, tc, s), doctest::Contains("epoch 1, batch 0, sigma"), NumericFault);
}

TEST_CASE("training data must be normal and match the model") {
  TempDir dir;
  SyntheticDatasetSpec spec;
  spec.scenes = 2;
  spec.train_videos_per_scene = 1;
  spec.test_videos_per_scene = 1;
  spec.frames = 8;
  spec.size = 8;
  spec.channels = 1;
  spec.objects = 1;
  auto ds = generate_synthetic_dataset(spec);

  TrainConfig tc;
  tc.model = small_model();
  tc.epochs = 1;
  tc.data = dir.path();

  ds.train[1].frame_labels.assign(8, 0);
  ds.train[1].frame_labels[3] = 1;
  write_split(dir / "train", ds.train, true);
  CHECK_THROWS_WITH_AS(train(tc), doctest::Contains("anomalous"), DataError);

  ds.train[1].frame_labels.clear();
  std::filesystem::remove(dir / "train/labels.csv");
  write_split(dir / "train", ds.train, false);
  tc.model.scene_classes = 1;
  CHECK_THROWS_WITH_AS(train(tc), doctest::Contains("scene"), DataError);

  tc.model.scene_classes = 2;
  tc.model.channels = 3;
  CHECK_THROWS_AS(train(tc), IncompatibleError);

  tc.model.channels = 1;
  const NcstCheckpoint ckpt = train(tc);
  CHECK(ckpt.meta.epochs == 1);
  CHECK(ckpt.meta.windows == 4);
  CHECK(ckpt.optimizer.has_value());
}

TEST_CASE("the tiny benchmark's loss halves over training") {
  SyntheticDatasetSpec spec;
  {
    KeyValues kv = preset("tiny");
    ConfigReader r(kv);
    apply_config(r, spec);
  }
  TrainConfig tc;
  {
    KeyValues kv = preset("tiny");
    ConfigReader r(kv);
    apply_config(r, tc);
  }
  tc.epochs = 40;
  const auto ds = generate_synthetic_dataset(spec);
  const auto windows = make_windows(ds.train, tc.model.frames);
  NcstModel m(tc.model, tc.seed);
  AdamaxState state;
  const auto meta = train_model(m, windows, tc, state);
  MESSAGE("first epoch " << meta.loss_history.front() << ", final epoch " << meta.loss_history.back());
  CHECK(meta.loss_history.back() < 0.5 * meta.loss_history.front());
}
