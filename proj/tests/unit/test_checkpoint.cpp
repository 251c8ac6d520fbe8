#include <doctest.h>

#include <fstream>

#include "../support/tempdir.hpp"
#include "adsm/checkpoint.hpp"
#include "adsm/errors.hpp"

using namespace adsm;
using adsm::testing::TempDir;

namespace {

NcstConfig small_config() {
  NcstConfig c;
  c.frames = 2;
  c.height = 8;
  c.width = 8;
  c.channels = 1;
  c.patch = 4;
  c.embed = 12;
  c.heads = 2;
  c.blocks = 2;
  c.ffn_mult = 2;
  c.time_width = 8;
  c.scene_width = 4;
  c.levels = 5;
  c.sigma_min = 0.01;
  return c;
}

NcstCheckpoint trained_checkpoint() {
  NcstModel m(small_config(), 4);
  Rng rng(5);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (auto& p : m.parameters())
    for (double& v : p.value.data()) v += nd(rng);
  NcstCheckpoint c = NcstCheckpoint::from_model(m);
  AdamaxState s = AdamaxState::for_params(c.params);
  s.step = 17;
  for (auto& t : s.m) t.fill(0.25);
  for (auto& t : s.u) t.fill(0.5);
  c.optimizer = std::move(s);
  c.meta.epochs = 3;
  c.meta.loss_history = {3.0, 2.0, 1.5};
  c.meta.seed = 11;
  c.meta.lr0 = 0.01;
  return c;
}

}  // namespace

TEST_CASE("checkpoints round trip parameters, optimizer and metadata") {
  TempDir dir;
  const NcstCheckpoint c = trained_checkpoint();
  save_checkpoint(c, dir / "m.ckpt");
  const NcstCheckpoint back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.config.fingerprint() == c.config.fingerprint());
  REQUIRE(back.params.size() == c.params.size());
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    CHECK(back.params[i].name == c.params[i].name);
    CHECK(back.params[i].value == c.params[i].value);
  }
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->step == 17);
  CHECK(back.optimizer->u[0] == c.optimizer->u[0]);
  CHECK(back.meta.loss_history == c.meta.loss_history);
  CHECK(back.meta.seed == 11);
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(c));

  const NcstModel m = back.to_model();
  const Tensor tokens(Shape{m.config().token_count(), m.config().token_dim()}, 0.3);
  const NcstModel orig = c.to_model();
  CHECK(m.score_tokens(tokens, 0.1, 0) == orig.score_tokens(tokens, 0.1, 0));
}

TEST_CASE("a different format version is incompatible") {
  std::string bytes = serialize_checkpoint(trained_checkpoint());
  bytes[8] = 9;
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(bytes), doctest::Contains("version 9"), IncompatibleError);
}

TEST_CASE("flipped and truncated bytes are corruption") {
  const std::string bytes = serialize_checkpoint(trained_checkpoint());
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(deserialize_checkpoint(flipped), CorruptionError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 100)), CorruptionError);
  CHECK_THROWS_AS(deserialize_checkpoint("not a checkpoint at all"), DataError);

  TempDir dir;
  std::ofstream(dir / "cut.ckpt", std::ios::binary) << bytes.substr(0, 40);
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), CorruptionError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);
}

TEST_CASE("loading against another config names both fingerprints") {
  const NcstCheckpoint c = trained_checkpoint();
  NcstConfig other = c.config;
  other.embed = 16;
  const std::string bytes = serialize_checkpoint(c);
  try {
    deserialize_checkpoint(bytes, &other);
    FAIL("expected IncompatibleError");
  } catch (const IncompatibleError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(fingerprint_hex(c.config.fingerprint())) != std::string::npos);
    CHECK(msg.find(fingerprint_hex(other.fingerprint())) != std::string::npos);
  }
  CHECK_NOTHROW(deserialize_checkpoint(bytes, &c.config));
}

TEST_CASE("parameter tables must match the architecture") {
  NcstCheckpoint c = trained_checkpoint();
  c.params.pop_back();
  CHECK_THROWS_AS(c.to_model(), IncompatibleError);
  NcstCheckpoint d = trained_checkpoint();
  d.params[0].value = Tensor(Shape{1, 1});
  CHECK_THROWS_AS(d.to_model(), IncompatibleError);
}
