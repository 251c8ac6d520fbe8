#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace adsm::cli {

struct Artifact {
  std::string path;
  std::string checksum;  // crc32 hex; directories hash their files in sorted order
};

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;  // fully resolved keys
  std::uint64_t seed = 0;
  std::vector<Artifact> inputs;
  std::vector<Artifact> outputs;
  std::map<std::string, double> timings;  // seconds
  std::string version;
  std::map<std::string, std::string> notes;
};

std::string checksum_path(const std::filesystem::path& p);
Artifact artifact(const std::filesystem::path& p);

void write_manifest(const RunManifest& m, const std::filesystem::path& file);
RunManifest read_manifest(const std::filesystem::path& file);

}  // namespace adsm::cli
