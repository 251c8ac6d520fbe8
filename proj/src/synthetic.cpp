#include "adsm/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "adsm/errors.hpp"

namespace adsm {

const char* to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::scene: return "scene";
    case AnomalyKind::motion: return "motion";
    case AnomalyKind::appearance: return "appearance";
  }
  return "?";
}

void SyntheticDatasetSpec::validate() const {
  ADSM_REQUIRE(scenes >= 1, "synthetic spec: need at least one scene");
  ADSM_REQUIRE(frames >= 2, "synthetic spec: videos need at least two frames");
  ADSM_REQUIRE(size >= 8, "synthetic spec: frame size must be at least 8");
  ADSM_REQUIRE(channels == 1 || channels == 3, "synthetic spec: channels must be 1 or 3");
  ADSM_REQUIRE(event_frames >= 1, "synthetic spec: event_frames must be positive");
  ADSM_REQUIRE(objects >= 1, "synthetic spec: need at least one object");
  double total = 0.0;
  for (double r : anomaly_rates) {
    ADSM_REQUIRE(r >= 0.0 && r <= 1.0, "synthetic spec: anomaly rate outside [0,1]");
    total += r;
  }
  ADSM_REQUIRE(total <= 1.0 + 1e-12, "synthetic spec: anomaly rates must sum to at most 1");
}

namespace {

enum class Glyph { square, disk, cross, ring };

struct ObjectKind {
  Glyph glyph = Glyph::square;
  std::array<double, 3> color{};
  double radius = 3.0;
};

// Normal catalog: squares and disks in three muted colors.
const std::array<std::array<double, 3>, 3> kCatalogColors{{
    {0.80, 0.25, 0.20}, {0.20, 0.70, 0.30}, {0.25, 0.40, 0.85}}};
// Appearance anomalies use colors and glyphs never seen in training.
const std::array<std::array<double, 3>, 3> kForeignColors{{
    {0.95, 0.90, 0.15}, {0.90, 0.20, 0.85}, {0.98, 0.98, 0.98}}};

// Direction families: 0 horizontal, 1 vertical, 2 diagonal, 3 anti-diagonal.
std::array<double, 2> unit_direction(int pattern, bool flip) {
  constexpr double k = 0.70710678118654752440;
  std::array<double, 2> d{};
  switch (pattern % 4) {
    case 0: d = {1.0, 0.0}; break;
    case 1: d = {0.0, 1.0}; break;
    case 2: d = {k, k}; break;
    default: d = {k, -k}; break;
  }
  if (flip) d = {-d[0], -d[1]};
  return d;
}

struct Mover {
  ObjectKind kind;
  double x = 0, y = 0;     // centre, pixels
  double vx = 0, vy = 0;   // pixels per frame
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

ObjectKind normal_kind(Rng& rng) {
  return {pick(rng, 2) == 0 ? Glyph::square : Glyph::disk, kCatalogColors[pick(rng, 3)],
          uniform(rng, 2.5, 3.5)};
}

ObjectKind foreign_kind(Rng& rng) {
  return {pick(rng, 2) == 0 ? Glyph::cross : Glyph::ring, kForeignColors[pick(rng, 3)],
          uniform(rng, 3.5, 4.5)};
}

bool covers(const ObjectKind& k, double dx, double dy) {
  const double r = k.radius;
  switch (k.glyph) {
    case Glyph::square: return std::abs(dx) <= r && std::abs(dy) <= r;
    case Glyph::disk: return dx * dx + dy * dy <= r * r;
    case Glyph::cross:
      return (std::abs(dx) <= r && std::abs(dy) <= 1.0) || (std::abs(dy) <= r && std::abs(dx) <= 1.0);
    case Glyph::ring: {
      const double q = dx * dx + dy * dy;
      return q <= r * r && q >= (r - 1.6) * (r - 1.6);
    }
  }
  return false;
}

// Shared backdrop: grey floor, a lighter walkway band and two fixed fixtures.
double backdrop(std::size_t y, std::size_t x, std::size_t l, std::size_t size) {
  const double fy = static_cast<double>(y) / static_cast<double>(size);
  const double fx = static_cast<double>(x) / static_cast<double>(size);
  double v = 0.30 + 0.08 * fy;
  if (fy > 0.38 && fy < 0.62) v += 0.10;
  if (fx > 0.08 && fx < 0.20 && fy > 0.08 && fy < 0.22) v -= 0.12;
  if (fx > 0.80 && fx < 0.92 && fy > 0.78 && fy < 0.92) v -= 0.12;
  const double tint[3] = {1.0, 0.97, 0.92};
  return v * tint[l % 3];
}

void set_velocity(Mover& m, int pattern, double speed, Rng& rng) {
  const auto d = unit_direction(pattern, pick(rng, 2) == 1);
  m.vx = d[0] * speed;
  m.vy = d[1] * speed;
}

void rescale_velocity(Mover& m, int pattern, double speed) {
  const double cur = std::hypot(m.vx, m.vy);
  auto d = unit_direction(pattern, false);
  // keep the sign of travel along the family's axis
  if (cur > 0 && d[0] * m.vx + d[1] * m.vy < 0) d = {-d[0], -d[1]};
  m.vx = d[0] * speed;
  m.vy = d[1] * speed;
}

void advance(Mover& m, double size) {
  const double lo = m.kind.radius, hi = size - 1.0 - m.kind.radius;
  m.x += m.vx;
  m.y += m.vy;
  if (m.x < lo) { m.x = 2 * lo - m.x; m.vx = -m.vx; }
  if (m.x > hi) { m.x = 2 * hi - m.x; m.vx = -m.vx; }
  if (m.y < lo) { m.y = 2 * lo - m.y; m.vy = -m.vy; }
  if (m.y > hi) { m.y = 2 * hi - m.y; m.vy = -m.vy; }
}

struct SegmentPlan {
  bool anomalous = false;
  AnomalyKind kind = AnomalyKind::scene;
};

VideoSequence render_video(const SyntheticDatasetSpec& spec, std::size_t scene,
                           const std::string& id, const std::vector<SegmentPlan>& plan, Rng& rng) {
  const std::size_t S = spec.size, C = spec.channels;
  const double fs = static_cast<double>(S);
  const int pattern = scene_motion_pattern(scene);
  const int foreign_pattern = scene_motion_pattern((scene + 1) % std::max<std::size_t>(spec.scenes, 2));
  const double brightness = uniform(rng, -0.03, 0.03);

  std::vector<Mover> movers(spec.objects);
  for (auto& m : movers) {
    m.kind = normal_kind(rng);
    m.x = uniform(rng, m.kind.radius, fs - 1.0 - m.kind.radius);
    m.y = uniform(rng, m.kind.radius, fs - 1.0 - m.kind.radius);
    set_velocity(m, pattern, uniform(rng, spec.normal_speed_min, spec.normal_speed_max), rng);
  }

  VideoSequence v;
  v.video_id = id;
  v.scene = static_cast<int>(scene);
  v.frames = Tensor(Shape{spec.frames, S, S, C});
  if (!plan.empty()) v.frame_labels.assign(spec.frames, 0);

  Mover saved;
  bool active = false;
  std::size_t active_segment = static_cast<std::size_t>(-1);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const std::size_t seg = f / spec.event_frames;
    const bool anomalous = seg < plan.size() && plan[seg].anomalous;
    // Enter or leave an anomalous segment by altering the first object.
    if (anomalous && (!active || seg != active_segment)) {
      if (active) movers[0] = saved;
      saved = movers[0];
      Mover& m = movers[0];
      const double speed = std::hypot(m.vx, m.vy);
      switch (plan[seg].kind) {
        case AnomalyKind::scene: rescale_velocity(m, foreign_pattern, speed); break;
        case AnomalyKind::motion:
          rescale_velocity(m, pattern, uniform(rng, spec.fast_speed_min, spec.fast_speed_max));
          break;
        case AnomalyKind::appearance:
          m.kind = foreign_kind(rng);
          m.x = std::clamp(m.x, m.kind.radius, fs - 1.0 - m.kind.radius);
          m.y = std::clamp(m.y, m.kind.radius, fs - 1.0 - m.kind.radius);
          break;
      }
      active = true;
      active_segment = seg;
    } else if (!anomalous && active) {
      // restore the original identity and motion family, keeping position
      const double x = movers[0].x, y = movers[0].y;
      movers[0] = saved;
      movers[0].x = std::clamp(x, saved.kind.radius, fs - 1.0 - saved.kind.radius);
      movers[0].y = std::clamp(y, saved.kind.radius, fs - 1.0 - saved.kind.radius);
      active = false;
    }
    if (anomalous) v.frame_labels[f] = 1;

    double* out = v.frames.data().data() + f * S * S * C;
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x) {
        std::array<double, 3> px{};
        for (std::size_t l = 0; l < C; ++l) px[l] = backdrop(y, x, l, S) + brightness;
        for (const auto& m : movers)
          if (covers(m.kind, static_cast<double>(x) - m.x, static_cast<double>(y) - m.y))
            for (std::size_t l = 0; l < C; ++l)
              px[l] = C == 1 ? (m.kind.color[0] + m.kind.color[1] + m.kind.color[2]) / 3.0
                             : m.kind.color[l];
        for (std::size_t l = 0; l < C; ++l) {
          // 8-bit quantisation, as decoded video would be
          const double q = std::round(std::clamp(px[l], 0.0, 1.0) * 255.0) / 255.0;
          out[(y * S + x) * C + l] = q;
        }
      }
    for (auto& m : movers) advance(m, fs);
  }
  return v;
}

std::string make_id(const char* split, std::size_t scene, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_s%02zu_v%03zu", split, scene, index);
  return buf;
}

}  // namespace

int scene_motion_pattern(std::size_t scene) { return static_cast<int>(scene % 4); }

SyntheticDataset generate_synthetic_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  SyntheticDataset ds;
  std::uint64_t stream = 0;
  for (std::size_t s = 0; s < spec.scenes; ++s)
    for (std::size_t v = 0; v < spec.train_videos_per_scene; ++v) {
      Rng rng = derive_rng(spec.seed, {0, stream++});
      ds.train.push_back(render_video(spec, s, make_id("train", s, v), {}, rng));
    }

  const std::size_t segments = (spec.frames + spec.event_frames - 1) / spec.event_frames;
  const double r_scene = spec.anomaly_rates[0];
  const double r_motion = spec.anomaly_rates[1];
  const double r_app = spec.anomaly_rates[2];
  stream = 0;
  for (std::size_t s = 0; s < spec.scenes; ++s)
    for (std::size_t v = 0; v < spec.test_videos_per_scene; ++v) {
      Rng rng = derive_rng(spec.seed, {1, stream++});
      const std::string id = make_id("test", s, v);
      std::vector<SegmentPlan> plan(segments);
      for (std::size_t k = 0; k < segments; ++k) {
        const double u = uniform(rng, 0.0, 1.0);
        if (u < r_scene && spec.scenes >= 2) plan[k] = {true, AnomalyKind::scene};
        else if (u >= r_scene && u < r_scene + r_motion) plan[k] = {true, AnomalyKind::motion};
        else if (u >= r_scene + r_motion && u < r_scene + r_motion + r_app)
          plan[k] = {true, AnomalyKind::appearance};
      }
      ds.test.push_back(render_video(spec, s, id, plan, rng));
      for (std::size_t k = 0; k < segments; ++k)
        if (plan[k].anomalous)
          ds.events.push_back({id, plan[k].kind, k * spec.event_frames,
                               std::min(spec.frames, (k + 1) * spec.event_frames)});
    }
  return ds;
}

}  // namespace adsm
