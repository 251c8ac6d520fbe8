#include "manifest.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "adsm/errors.hpp"

namespace adsm::cli {

namespace fs = std::filesystem;

namespace {

std::uint32_t crc_file(const fs::path& p, std::uint32_t crc) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return static_cast<std::uint32_t>(crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::string checksum_path(const fs::path& p) {
  std::uint32_t crc = 0;
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string rel = fs::relative(f, p).generic_string();
      crc = static_cast<std::uint32_t>(crc32(crc, reinterpret_cast<const Bytef*>(rel.data()), static_cast<uInt>(rel.size())));
      crc = crc_file(f, crc);
    }
  } else {
    crc = crc_file(p, 0);
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

Artifact artifact(const fs::path& p) { return {p.string(), checksum_path(p)}; }

void write_manifest(const RunManifest& m, const fs::path& file) {
  nlohmann::json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["seed"] = m.seed;
  auto arts = [](const std::vector<Artifact>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : v) a.push_back({{"path", x.path}, {"checksum", x.checksum}});
    return a;
  };
  j["inputs"] = arts(m.inputs);
  j["outputs"] = arts(m.outputs);
  j["timings"] = m.timings;
  j["version"] = m.version;
  j["notes"] = m.notes;
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + file.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("inputs")) m.inputs.push_back({a.at("path"), a.at("checksum")});
    for (const auto& a : j.at("outputs")) m.outputs.push_back({a.at("path"), a.at("checksum")});
    m.timings = j.at("timings").get<std::map<std::string, double>>();
    m.version = j.at("version").get<std::string>();
    if (j.contains("notes")) m.notes = j.at("notes").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + file.string() + ": " + e.what());
  }
  return m;
}

}  // namespace adsm::cli
