#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "../../tools/manifest.hpp"
#include "../support/tempdir.hpp"
#include "adsm/scoring.hpp"

using adsm::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run adsm_run(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" ADSM_CLI_PATH "' " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One shared generate/train/score run reused by the tests that only read it.
struct Pipeline {
  TempDir dir{"adsm_cli"};
  double seconds = 0.0;
  Run gen, train, score, eval;

  Pipeline() {
    const auto t0 = std::chrono::steady_clock::now();
    gen = adsm_run(dir.path(), "generate --seed 7 --out data");
    train = adsm_run(dir.path(), "train --data data --out model.ckpt --epochs 1");
    score = adsm_run(dir.path(), "score --ckpt model.ckpt --data data --out scores");
    eval = adsm_run(dir.path(), "eval --scores scores --labels data/test/labels.csv --out report.csv");
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("generate, train, score and eval run end to end") {
  Pipeline& p = pipeline();
  CHECK_MESSAGE(p.gen.code == 0, p.gen.output);
  CHECK_MESSAGE(p.train.code == 0, p.train.output);
  CHECK_MESSAGE(p.score.code == 0, p.score.output);
  CHECK_MESSAGE(p.eval.code == 0, p.eval.output);
  CHECK(p.seconds < 300.0);
  const std::string report = slurp(p.dir / "report.csv");
  CHECK(report.rfind("variant,micro_auc,macro_auc,excluded_videos\nfull,", 0) == 0);
  for (const char* m : {"data/manifest.json", "model.ckpt.manifest.json", "scores/manifest.json", "report.csv.manifest.json"})
    CHECK_MESSAGE(fs::exists(p.dir / m), m);
  const auto finals = adsm::read_final_scores(p.dir / "scores/scores_final.csv");
  CHECK(finals.size() == 10);
  for (const auto& f : finals)
    for (double x : f.indicator) CHECK((x >= 0.0 && x <= 1.0));
}

TEST_CASE("generation is deterministic in the seed") {
  TempDir dir;
  REQUIRE(adsm_run(dir.path(), "generate --seed 7 --out a").code == 0);
  REQUIRE(adsm_run(dir.path(), "generate --seed 7 --out b").code == 0);
  REQUIRE(adsm_run(dir.path(), "generate --seed 8 --out c").code == 0);
  CHECK(adsm::cli::checksum_path(dir / "a") == adsm::cli::checksum_path(dir / "b"));
  CHECK(adsm::cli::checksum_path(dir / "a") != adsm::cli::checksum_path(dir / "c"));
}

TEST_CASE("usage errors exit with 1") {
  TempDir dir;
  const Run missing = adsm_run(dir.path(), "generate");
  CHECK(missing.code == 1);
  CHECK(missing.output.find("--out") != std::string::npos);
  CHECK(adsm_run(dir.path(), "frobnicate").code == 1);
  CHECK(adsm_run(dir.path(), "generate --out x --set nosuchkey=1").code == 1);
  CHECK(adsm_run(dir.path(), "generate --out x --preset huge").code == 1);
  CHECK(adsm_run(dir.path(), "generate --out x --anomaly-rates 0.1,2,0").code == 1);
  CHECK(adsm_run(dir.path(), "--version").code == 0);
}

TEST_CASE("evaluating scores without anomalies fails") {
  TempDir dir;
  REQUIRE(adsm_run(dir.path(), "generate --seed 3 --anomaly-rates 0,0,0 --out data").code == 0);
  REQUIRE(adsm_run(dir.path(), "train --data data --out m.ckpt --epochs 1").code == 0);
  REQUIRE(adsm_run(dir.path(), "score --ckpt m.ckpt --data data --out s --levels 3").code == 0);
  const Run r = adsm_run(dir.path(), "eval --scores s --labels data/test/labels.csv --out r.csv");
  CHECK(r.code == 2);
  CHECK(r.output.find("single class") != std::string::npos);
}

TEST_CASE("level spacing changes raw scores and is recorded") {
  Pipeline& p = pipeline();
  REQUIRE(p.train.code == 0);
  const auto& d = p.dir;
  REQUIRE(adsm_run(d.path(), "score --ckpt model.ckpt --data data --out geo --levels 4 --schedule geometric").code == 0);
  REQUIRE(adsm_run(d.path(), "score --ckpt model.ckpt --data data --out lin --levels 4 --schedule linear").code == 0);
  CHECK(slurp(d / "geo/scores_raw.csv") != slurp(d / "lin/scores_raw.csv"));
  CHECK(adsm::cli::read_manifest(d / "geo/manifest.json").config.at("schedule") == "geometric");
  CHECK(adsm::cli::read_manifest(d / "lin/manifest.json").config.at("schedule") == "linear");
}

TEST_CASE("manifests replay to identical bytes") {
  Pipeline& p = pipeline();
  REQUIRE(p.score.code == 0);
  const std::string before = slurp(p.dir / "scores/scores_final.csv");
  const Run r = adsm_run(fs::temp_directory_path(), "--manifest '" + (p.dir / "scores/manifest.json").string() + "'");
  CHECK_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(p.dir / "scores/scores_final.csv") == before);
}

TEST_CASE("replay refuses changed inputs") {
  TempDir dir;
  REQUIRE(adsm_run(dir.path(), "generate --seed 4 --videos-per-scene 1 --out data").code == 0);
  REQUIRE(adsm_run(dir.path(), "train --data data --out m.ckpt --epochs 1").code == 0);
  std::ofstream(dir / "data/train/scenes.csv", std::ios::app) << "\n";
  const Run r = adsm_run(dir.path(), "--manifest m.ckpt.manifest.json");
  CHECK(r.code == 2);
}

TEST_CASE("plots shade labeled anomalies") {
  Pipeline& p = pipeline();
  REQUIRE(p.score.code == 0);
  REQUIRE(adsm_run(p.dir.path(), "plot --scores scores --labels data/test/labels.csv --out plots").code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(p.dir / "plots"))
    if (e.path().extension() == ".svg") {
      ++files;
      CHECK(slurp(e.path()).find("</svg>") != std::string::npos);
    }
  CHECK(files == 10);
}

TEST_CASE("scoring a mismatched geometry names both fingerprints") {
  Pipeline& p = pipeline();
  REQUIRE(p.train.code == 0);
  REQUIRE(adsm_run(p.dir.path(), "generate --seed 7 --size 24 --out small").code == 0);
  const Run r = adsm_run(p.dir.path(), "score --ckpt model.ckpt --data small --out bad");
  CHECK(r.code == 2);
  std::size_t hits = 0;
  for (std::size_t i = r.output.find("fingerprint "); i != std::string::npos; i = r.output.find("fingerprint ", i + 1))
    ++hits;
  CHECK(hits == 2);
}

TEST_CASE("noise ladders outside the trained range are refused") {
  Pipeline& p = pipeline();
  REQUIRE(p.train.code == 0);
  CHECK(adsm_run(p.dir.path(), "score --ckpt model.ckpt --data data --out wide --sigma-max 5").code == 2);
}

TEST_CASE("demo-modes reports both stationary points") {
  TempDir dir;
  const Run r = adsm_run(dir.path(), "demo-modes --out f.csv");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("stationary point 1") != std::string::npos);
  CHECK(fs::exists(dir / "f.svg"));
  const auto m = adsm::cli::read_manifest(dir / "f.csv.manifest.json");
  CHECK(m.notes.count("mode_1") == 1);
}
