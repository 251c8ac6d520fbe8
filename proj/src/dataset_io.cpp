#include "adsm/dataset_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "adsm/errors.hpp"

namespace adsm {

static_assert(std::endian::native == std::endian::little,
              "payload I/O assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

constexpr char kVideoMagic[8] = {'A', 'D', 'S', 'M', 'V', 'I', 'D', '1'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

long parse_long(const std::string& s, const fs::path& file) {
  try {
    std::size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("malformed integer '" + s + "' in " + file.string());
  }
}

}  // namespace

void write_video_file(const fs::path& path, const Tensor& frames, PixelType type) {
  ADSM_REQUIRE(frames.rank() >= 1 && frames.rank() <= 4,
               "video file supports 1 to 4 dims, got " + shape_str(frames.shape()));
  std::string buf(kVideoMagic, 8);
  put_u32(buf, static_cast<std::uint32_t>(type));
  put_u32(buf, static_cast<std::uint32_t>(frames.rank()));
  for (std::size_t i = 0; i < 4; ++i)
    put_u32(buf, i < frames.rank() ? static_cast<std::uint32_t>(frames.dim(i)) : 0u);
  switch (type) {
    case PixelType::u8:
      for (double v : frames.data()) {
        const double q = std::round(v * 255.0);
        ADSM_REQUIRE(q >= 0.0 && q <= 255.0, "u8 video payload needs values in [0,1]");
        buf.push_back(static_cast<char>(static_cast<unsigned char>(q)));
      }
      break;
    case PixelType::f32:
      for (double v : frames.data()) {
        const float f = static_cast<float>(v);
        buf.append(reinterpret_cast<const char*>(&f), sizeof f);
      }
      break;
    case PixelType::f64:
      buf.append(reinterpret_cast<const char*>(frames.data().data()), frames.size() * sizeof(double));
      break;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("short write to " + path.string());
}

Tensor read_video_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open video file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 32 || std::memcmp(bytes.data(), kVideoMagic, 8) != 0)
    throw DataError("not an ADSMVID1 file: " + path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t dtype = get_u32(p + 8);
  const std::uint32_t ndims = get_u32(p + 12);
  if (ndims < 1 || ndims > 4) throw DataError("bad dimension count in " + path.string());
  Shape shape;
  for (std::uint32_t i = 0; i < ndims; ++i) shape.push_back(get_u32(p + 16 + 4 * i));
  const std::size_t count = shape_size(shape);
  const std::size_t width = dtype == 0 ? 1 : dtype == 1 ? 4 : dtype == 2 ? 8 : 0;
  if (width == 0) throw DataError("unknown dtype code in " + path.string());
  if (bytes.size() != 32 + count * width)
    throw DataError("payload size mismatch in " + path.string());
  Tensor t(shape);
  const char* payload = bytes.data() + 32;
  for (std::size_t i = 0; i < count; ++i) {
    if (dtype == 0) {
      t[i] = static_cast<double>(static_cast<unsigned char>(payload[i])) / 255.0;
    } else if (dtype == 1) {
      float f;
      std::memcpy(&f, payload + 4 * i, 4);
      t[i] = f;
    } else {
      std::memcpy(&t[i], payload + 8 * i, 8);
    }
  }
  return t;
}

void write_split(const fs::path& dir, const std::vector<VideoSequence>& videos, bool with_labels) {
  fs::create_directories(dir);
  std::ofstream scenes(dir / "scenes.csv", std::ios::trunc);
  if (!scenes) throw DataError("cannot write " + (dir / "scenes.csv").string());
  scenes << "video_id,scene_label\n";
  std::ofstream labels;
  if (with_labels) {
    labels.open(dir / "labels.csv", std::ios::trunc);
    labels << "video_id,frame_index,label\n";
  }
  for (const auto& v : videos) {
    write_video_file(dir / (v.video_id + ".adsv"), v.frames);
    scenes << v.video_id << ',' << v.scene << '\n';
    if (with_labels)
      for (std::size_t f = 0; f < v.length(); ++f)
        labels << v.video_id << ',' << f << ','
               << (f < v.frame_labels.size() ? int(v.frame_labels[f]) : 0) << '\n';
  }
}

void write_events(const fs::path& file, const std::vector<InjectedEvent>& events) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out << "video_id,kind,start,end\n";
  for (const auto& e : events)
    out << e.video_id << ',' << to_string(e.kind) << ',' << e.start << ',' << e.end << '\n';
}

void write_dataset(const fs::path& root, const SyntheticDataset& ds) {
  write_split(root / "train", ds.train, false);
  write_split(root / "test", ds.test, true);
  write_events(root / "test" / "events.csv", ds.events);
}

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> read_labels_csv(const fs::path& file) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : read_csv_rows(file)) {
    if (row.size() != 3) throw DataError("labels.csv rows need 3 columns: " + file.string());
    const long frame = parse_long(row[1], file);
    const long label = parse_long(row[2], file);
    if (frame < 0 || (label != 0 && label != 1))
      throw DataError("bad label row in " + file.string());
    auto [it, fresh] = index.emplace(row[0], out.size());
    if (fresh) out.push_back({row[0], {}});
    auto& vec = out[it->second].second;
    if (vec.size() <= static_cast<std::size_t>(frame)) vec.resize(frame + 1, 0);
    vec[frame] = static_cast<std::uint8_t>(label);
  }
  return out;
}

std::vector<VideoSequence> read_split(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset split not found: " + dir.string());
  std::vector<VideoSequence> videos;
  for (const auto& row : read_csv_rows(dir / "scenes.csv")) {
    if (row.size() != 2) throw DataError("scenes.csv rows need 2 columns in " + dir.string());
    VideoSequence v;
    v.video_id = row[0];
    const long scene = parse_long(row[1], dir / "scenes.csv");
    if (scene < 0) throw DataError("negative scene label in " + dir.string());
    v.scene = static_cast<int>(scene);
    v.frames = read_video_file(dir / (v.video_id + ".adsv"));
    if (v.frames.rank() != 4) throw DataError("video " + v.video_id + " is not [n,H,W,c]");
    videos.push_back(std::move(v));
  }
  if (fs::exists(dir / "labels.csv")) {
    std::map<std::string, VideoSequence*> byid;
    for (auto& v : videos) byid[v.video_id] = &v;
    for (auto& [id, labels] : read_labels_csv(dir / "labels.csv")) {
      auto it = byid.find(id);
      if (it == byid.end()) throw DataError("labels.csv names unknown video " + id);
      if (labels.size() != it->second->length())
        throw DataError("labels.csv frame count differs from video " + id);
      it->second->frame_labels = std::move(labels);
    }
  }
  return videos;
}

}  // namespace adsm
