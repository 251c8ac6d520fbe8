#include "adsm/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "adsm/config.hpp"
#include "adsm/errors.hpp"

namespace adsm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'S', 'M', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::string& buf, const std::string& s) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
  buf += s;
}

void put_doubles(std::string& buf, std::span<const double> d) {
  buf.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(std::span<double> out) {
    need(out.size() * sizeof(double));
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(double));
    pos_ += out.size() * sizeof(double);
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CorruptionError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::string metadata_json(const TrainingMetadata& m) {
  nlohmann::json j;
  j["epochs"] = m.epochs;
  j["loss_history"] = m.loss_history;
  j["seed"] = m.seed;
  j["lr0"] = m.lr0;
  j["batch"] = m.batch;
  j["clip_norm"] = m.clip_norm;
  j["motion_weights"] = m.motion_weights;
  j["sigma_min"] = m.sigma_min;
  j["sigma_max"] = m.sigma_max;
  j["windows"] = m.windows;
  return j.dump();
}

TrainingMetadata parse_metadata(const std::string& text) {
  TrainingMetadata m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.epochs = j.at("epochs").get<std::size_t>();
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.lr0 = j.at("lr0").get<double>();
    m.batch = j.at("batch").get<std::size_t>();
    m.clip_norm = j.at("clip_norm").get<double>();
    m.motion_weights = j.at("motion_weights").get<bool>();
    m.sigma_min = j.at("sigma_min").get<double>();
    m.sigma_max = j.at("sigma_max").get<double>();
    m.windows = j.at("windows").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("checkpoint metadata unreadable: ") + e.what());
  }
  return m;
}

std::string tensor_table(std::span<const Parameter> params) {
  std::string buf;
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_str(buf, p.name);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint64_t>(buf, d);
    put_doubles(buf, p.value.data());
  }
  return buf;
}

std::uint32_t crc_of(const std::string& bytes, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n)));
}

}  // namespace

NcstCheckpoint NcstCheckpoint::from_model(const NcstModel& model) {
  NcstCheckpoint c;
  c.config = model.config();
  c.params = model.parameters();
  return c;
}

NcstModel NcstCheckpoint::to_model() const {
  NcstModel model(config, 0);
  auto& dst = model.parameters();
  if (dst.size() != params.size())
    throw IncompatibleError("checkpoint holds " + std::to_string(params.size()) + " tensors, the model expects " +
                            std::to_string(dst.size()));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != params[i].name || dst[i].value.shape() != params[i].value.shape())
      throw IncompatibleError("checkpoint tensor '" + params[i].name + "' " + shape_str(params[i].value.shape()) +
                              " does not match model tensor '" + dst[i].name + "' " +
                              shape_str(dst[i].value.shape()));
    dst[i].value = params[i].value;
  }
  return model;
}

std::string parameter_payload(const NcstCheckpoint& ckpt) { return tensor_table(ckpt.params); }

std::string serialize_checkpoint(const NcstCheckpoint& ckpt) {
  std::string buf(kMagic, 8);
  put<std::uint32_t>(buf, NcstCheckpoint::kFormatVersion);
  put<std::uint64_t>(buf, ckpt.config.fingerprint());
  put_str(buf, ckpt.config.canonical());
  put_str(buf, metadata_json(ckpt.meta));
  buf += tensor_table(ckpt.params);
  if (ckpt.optimizer) {
    const AdamaxState& s = *ckpt.optimizer;
    ADSM_REQUIRE(s.m.size() == ckpt.params.size() && s.u.size() == ckpt.params.size(),
                 "checkpoint: optimizer state does not match the parameter list");
    put<std::uint8_t>(buf, 1);
    put<std::uint64_t>(buf, s.step);
    put<double>(buf, s.beta1);
    put<double>(buf, s.beta2);
    put<double>(buf, s.eps);
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      ADSM_REQUIRE(s.m[i].shape() == ckpt.params[i].value.shape() && s.u[i].shape() == ckpt.params[i].value.shape(),
                   "checkpoint: optimizer moment shape mismatch for " + ckpt.params[i].name);
      put_doubles(buf, s.m[i].data());
      put_doubles(buf, s.u[i].data());
    }
  } else {
    put<std::uint8_t>(buf, 0);
  }
  put<std::uint32_t>(buf, crc_of(buf, buf.size()));
  return buf;
}

void save_checkpoint(const NcstCheckpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

NcstCheckpoint deserialize_checkpoint(const std::string& bytes, const NcstConfig* expected) {
  if (bytes.size() < 8 + 4 + 4 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw DataError("not an ADSMCKPT checkpoint");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 8, 4);
  if (version != NcstCheckpoint::kFormatVersion)
    throw IncompatibleError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(NcstCheckpoint::kFormatVersion) + ")");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body, 4);
  if (crc_of(bytes, body) != stored_crc) throw CorruptionError("checkpoint checksum mismatch");

  Reader r(bytes, body);
  r.get<std::uint64_t>();  // magic
  r.get<std::uint32_t>();  // version
  const auto fingerprint = r.get<std::uint64_t>();
  NcstCheckpoint ckpt;
  ckpt.config = ncst_config_from_canonical(r.str());
  if (ckpt.config.fingerprint() != fingerprint) throw CorruptionError("checkpoint config does not match its fingerprint");
  if (expected && expected->fingerprint() != fingerprint)
    throw IncompatibleError("checkpoint config fingerprint " + fingerprint_hex(fingerprint) + " differs from the expected " +
                            fingerprint_hex(expected->fingerprint()));
  ckpt.meta = parse_metadata(r.str());

  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    p.name = r.str();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CorruptionError("checkpoint tensor rank out of range");
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    p.value = Tensor(shape);
    r.doubles(p.value.data());
    ckpt.params.push_back(std::move(p));
  }
  if (r.get<std::uint8_t>() == 1) {
    AdamaxState s;
    s.step = r.get<std::uint64_t>();
    s.beta1 = r.get<double>();
    s.beta2 = r.get<double>();
    s.eps = r.get<double>();
    for (const auto& p : ckpt.params) {
      s.m.emplace_back(p.value.shape());
      r.doubles(s.m.back().data());
      s.u.emplace_back(p.value.shape());
      r.doubles(s.u.back().data());
    }
    ckpt.optimizer = std::move(s);
  }
  if (r.pos() != body) throw CorruptionError("checkpoint has trailing bytes");
  return ckpt;
}

NcstCheckpoint load_checkpoint(const std::filesystem::path& path, const NcstConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, expected);
}

}  // namespace adsm
