#include "mixtrack/synth.hpp"

#include <algorithm>
#include <array>
#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "mixtrack/error.hpp"
#include "mixtrack/ini.hpp"
#include "mixtrack/textio.hpp"

namespace mixtrack::synth {

namespace {

using calib::Point;
using Rng = std::mt19937_64;

struct ClassProfile {
  double w_px;
  double h_px;
  double min_speed;  // m/s
  double max_speed;
};

// Indexed like ClassCatalog::defaults().
constexpr std::array<ClassProfile, 14> kProfiles{{
    {90, 50, 6.0, 12.0},   // ambulance
    {50, 45, 4.0, 8.0},    // auto rickshaw
    {36, 40, 3.0, 5.0},    // bicycle
    {140, 70, 5.0, 10.0},  // bus
    {70, 50, 4.0, 8.0},    // human hauler
    {80, 50, 6.0, 12.0},   // microbus
    {110, 60, 5.0, 10.0},  // minibus
    {36, 40, 6.0, 12.0},   // motor cycle
    {20, 45, 1.0, 1.8},    // pedestrian
    {80, 50, 6.0, 12.0},   // pickup
    {80, 45, 6.0, 13.0},   // private passenger car
    {45, 45, 2.5, 4.5},    // rickshaw
    {90, 55, 4.0, 9.0},    // special purpose vehicle
    {120, 65, 5.0, 10.0},  // truck
}};

constexpr double kLaneMargin = 30.0;
constexpr double kMaxStepFraction = 0.25;  // of min(w, h), per frame
constexpr std::int64_t kMinLifetime = 10;
constexpr std::int64_t kGapLead = 6;
constexpr int kPlacementAttempts = 2000;

double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
Point sub(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }

double uniform(Rng& rng, double lo, double hi) { return boost::random::uniform_real_distribution<double>(lo, hi)(rng); }

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return boost::random::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

struct Placed {
  AgentSpec agent;
  int lane;
  double x_start_px;
  double px_per_frame;  // signed
};

double pixel_x(const Placed& p, std::int64_t frame) {
  return p.x_start_px + p.px_per_frame * static_cast<double>(frame - p.agent.spawn_frame);
}

bool conflicts(const Placed& a, const Placed& b) {
  if (a.lane != b.lane) return false;
  const auto lo = std::max(a.agent.spawn_frame, b.agent.spawn_frame);
  const auto hi = std::min(a.agent.exit_frame, b.agent.exit_frame);
  // Give coasting tracks room as well.
  if (lo > hi + 8) return false;
  const double need = 0.5 * (a.agent.w_px + b.agent.w_px) + std::max(a.agent.w_px, b.agent.w_px);
  const auto lo_c = std::min(lo, hi);
  const auto hi_c = std::max(lo, hi);
  const double g1 = pixel_x(a, lo_c) - pixel_x(b, lo_c);
  const double g2 = pixel_x(a, hi_c) - pixel_x(b, hi_c);
  if ((g1 > 0) != (g2 > 0)) return true;
  return std::abs(g1) < need || std::abs(g2) < need;
}

std::vector<AgentSpec> place_random_agents(const ScenarioSpec& spec, Rng& rng) {
  double max_h = 0.0;
  for (const auto& p : kProfiles) max_h = std::max(max_h, p.h_px);
  const double lane_h = max_h + kLaneMargin;
  const int lanes = static_cast<int>(std::floor(spec.image_height / lane_h));
  const auto frames = spec.frame_count();
  if (lanes < 1) throw ValidationError("image too small for any lane");

  std::vector<Placed> placed;
  for (std::size_t n = 0; n < spec.n_random_agents; ++n) {
    bool ok = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !ok; ++attempt) {
      const auto cls = static_cast<int>(uniform_int(rng, 0, static_cast<std::int64_t>(kProfiles.size()) - 1));
      const auto& prof = kProfiles[static_cast<std::size_t>(cls)];
      const int lane = static_cast<int>(uniform_int(rng, 0, lanes - 1));
      const double dir = lane % 2 == 0 ? 1.0 : -1.0;
      double speed = uniform(rng, prof.min_speed, prof.max_speed);
      const auto spawn = uniform_int(rng, 1, frames);
      if (prof.w_px + 2.0 >= spec.image_width) continue;

      const double y_px = (lane + 0.5) * lane_h;
      const double left = 0.5 * prof.w_px + 1.0;
      const double right = spec.image_width - 0.5 * prof.w_px - 1.0;
      const Point start_px{dir > 0 ? left : right, y_px};
      const Point end_px{dir > 0 ? right : left, y_px};
      const Point w0 = calib::to_world(start_px, spec.calibration);
      const Point w1 = calib::to_world(end_px, spec.calibration);
      const double dist_m = std::hypot(w1.x - w0.x, w1.y - w0.y);
      const double dist_px = right - left;
      const double cap = kMaxStepFraction * std::min(prof.w_px, prof.h_px);
      speed = std::min(speed, cap * spec.fps * dist_m / dist_px);

      const auto travel = static_cast<std::int64_t>(std::floor(dist_m / speed * spec.fps));
      const auto exit = std::min(spawn + travel, frames);
      if (exit - spawn < kMinLifetime) continue;

      Placed p;
      p.agent.class_id = cls;
      p.agent.spawn_frame = spawn;
      p.agent.exit_frame = exit;
      p.agent.position = w0;
      p.agent.velocity = {speed * (w1.x - w0.x) / dist_m, speed * (w1.y - w0.y) / dist_m};
      p.agent.w_px = prof.w_px;
      p.agent.h_px = prof.h_px;
      p.lane = lane;
      p.x_start_px = start_px.x;
      p.px_per_frame = dir * speed * dist_px / dist_m / spec.fps;
      if (std::any_of(placed.begin(), placed.end(), [&](const Placed& q) { return conflicts(p, q); })) continue;
      placed.push_back(p);
      ok = true;
    }
    if (!ok) throw ValidationError("could not place " + std::to_string(spec.n_random_agents) + " non-overlapping agents");
  }
  std::vector<AgentSpec> out;
  out.reserve(placed.size());
  for (const auto& p : placed) out.push_back(p.agent);
  return out;
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double n = std::sqrt(n2);
  for (auto& x : v) x /= n;
  return v;
}

std::optional<std::int64_t> crossing_frame(const AgentSpec& a, double fps, const traffic::LineOfInterest& loi) {
  if (a.exit_frame <= a.spawn_frame) return std::nullopt;
  const Point p0 = a.position_at(a.spawn_frame, fps);
  const Point p1 = a.position_at(a.exit_frame, fps);
  const Point d = sub(p1, p0);
  const Point e = sub(loi.b, loi.a);
  const double denom = cross(d, e);
  if (denom == 0.0) return std::nullopt;
  const Point ap = sub(loi.a, p0);
  const double s = cross(ap, e) / denom;
  const double u = cross(ap, d) / denom;
  if (s < 0.0 || s > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  if (loi.direction != 0) {
    const double c = cross(e, d);
    if ((c > 0 ? 1 : -1) != loi.direction) return std::nullopt;
  }
  const double t = static_cast<double>(a.spawn_frame) + s * static_cast<double>(a.exit_frame - a.spawn_frame);
  return std::max(a.spawn_frame + 1, static_cast<std::int64_t>(std::ceil(t)));
}

GroundTruth build_truth(std::vector<AgentSpec> agents, const ScenarioSpec& spec, const traffic::LineOfInterest& loi,
                        double interval_s) {
  GroundTruth gt;
  const traffic::IntervalGrid grid(interval_s, spec.fps, spec.duration_s);
  gt.intervals.resize(static_cast<std::size_t>(grid.count()));
  for (int i = 0; i < grid.count(); ++i) {
    auto& m = gt.intervals[static_cast<std::size_t>(i)];
    m.index = i;
    m.start_s = grid.start(i);
    m.end_s = grid.end(i);
  }
  for (std::size_t k = 0; k < agents.size(); ++k) {
    AgentTruth t{agents[k], crossing_frame(agents[k], spec.fps, loi)};
    const auto& a = t.agent;
    if (t.crossing_frame) {
      if (const auto idx = grid.index_of(*t.crossing_frame)) ++gt.intervals[static_cast<std::size_t>(*idx)].classes[a.class_id].count;
    }
    std::map<int, std::int64_t> frames_in;
    for (auto f = a.spawn_frame; f <= a.exit_frame; ++f) {
      if (const auto idx = grid.index_of(f)) ++frames_in[*idx];
    }
    const double speed = std::hypot(a.velocity.x, a.velocity.y);
    for (const auto& [idx, n] : frames_in) {
      if (n >= 2) {
        gt.intervals[static_cast<std::size_t>(idx)].classes[a.class_id].speeds.push_back(
            {static_cast<std::int64_t>(k + 1), speed});
      }
    }
    gt.agents.push_back(std::move(t));
  }
  for (auto& m : gt.intervals) {
    for (auto& [cls, ci] : m.classes) ci.flow_vph = static_cast<double>(ci.count) * 3600.0 / m.duration();
  }
  traffic::aggregate(gt.intervals);
  return gt;
}

}  // namespace

Point AgentSpec::position_at(std::int64_t frame, double fps) const {
  const double dt = static_cast<double>(frame - spawn_frame) / fps;
  return {position.x + velocity.x * dt, position.y + velocity.y * dt};
}

std::int64_t ScenarioSpec::frame_count() const {
  return static_cast<std::int64_t>(std::floor(duration_s * fps + 1e-9));
}

void ScenarioSpec::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ValidationError("fps must be positive");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw ValidationError("duration_s must be positive");
  if (!(interval_s > 0.0) || !std::isfinite(interval_s)) throw ValidationError("interval_s must be positive");
  if (frame_count() < 1) throw ValidationError("scenario has no frames");
  if (frame_count() > 100'000'000) throw ValidationError("scenario too long");
  calibration.validate();
  if (loi.a == loi.b) throw ValidationError("loi endpoints coincide");
  if (loi.direction < -1 || loi.direction > 1) throw ValidationError("loi direction must be -1, 0 or 1");
  if (!(noise_px >= 0.0)) throw ValidationError("noise_px must be non-negative");
  if (!(miss_prob >= 0.0 && miss_prob < 1.0)) throw ValidationError("miss_prob must be in [0, 1)");
  if (!(embedding_noise >= 0.0)) throw ValidationError("embedding_noise must be non-negative");
  if (embedding_dim > 4096) throw ValidationError("embedding_dim too large");
  if (gap_frames < 0) throw ValidationError("gap_frames must be non-negative");
  if (!(image_width > 0.0 && image_height > 0.0)) throw ValidationError("image size must be positive");
  if (n_random_agents > 100'000) throw ValidationError("n_agents too large");
  const auto frames = frame_count();
  for (std::size_t k = 0; k < agents.size(); ++k) {
    const auto& a = agents[k];
    const auto tag = "agent " + std::to_string(k + 1) + ": ";
    if (a.class_id < 0) throw ValidationError(tag + "class must be non-negative");
    if (a.spawn_frame < 1 || a.exit_frame < a.spawn_frame || a.exit_frame > frames)
      throw ValidationError(tag + "frames must satisfy 1 <= spawn_frame <= exit_frame <= " + std::to_string(frames));
    if (!(a.w_px > 0.0 && a.h_px > 0.0)) throw ValidationError(tag + "box size must be positive");
    if (!std::isfinite(a.position.x) || !std::isfinite(a.position.y) || !std::isfinite(a.velocity.x) ||
        !std::isfinite(a.velocity.y))
      throw ValidationError(tag + "position and velocity must be finite");
  }
  for (const auto& o : occlusions) {
    if (o.agent >= agents.size()) throw ValidationError("occlusion names an unknown agent");
    if (o.first_frame < 1 || o.last_frame < o.first_frame || o.last_frame > frames)
      throw ValidationError("occlusion window outside the scenario");
  }
}

ScenarioSpec load_scenario(std::istream& in, const std::string& source) {
  const auto doc = ini::Document::parse(in, source);
  ScenarioSpec s;
  std::vector<std::pair<std::int64_t, std::string>> agent_sections;
  std::vector<std::string> occlusion_sections;
  for (const auto& name : doc.sections()) {
    if (name == "scenario" || name == "calibration" || name == "loi") continue;
    std::int64_t k = 0;
    if (name.rfind("agent.", 0) == 0 && textio::parse_int(name.substr(6), k) && k >= 1) {
      agent_sections.emplace_back(k, name);
    } else if (name.rfind("occlusion.", 0) == 0 && textio::parse_int(name.substr(10), k)) {
      occlusion_sections.push_back(name);
    } else {
      throw ValidationError(source + ": unknown section [" + name + "]");
    }
  }
  doc.check_keys("scenario", {"fps", "duration_s", "interval_s", "seed", "noise_px", "miss_prob", "embedding_dim",
                              "embedding_noise", "gap_frames", "n_agents", "image_width", "image_height"});
  doc.check_keys("calibration", {"phi", "omega", "delta_deg", "x0", "y0"});
  doc.check_keys("loi", {"x1", "y1", "x2", "y2", "direction"});

  s.fps = doc.real("scenario", "fps", s.fps);
  s.duration_s = doc.real("scenario", "duration_s", s.duration_s);
  s.interval_s = doc.real("scenario", "interval_s", s.interval_s);
  const auto seed = doc.integer("scenario", "seed", static_cast<std::int64_t>(s.seed));
  if (seed < 0) throw ValidationError(source + ": seed must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);
  s.noise_px = doc.real("scenario", "noise_px", s.noise_px);
  s.miss_prob = doc.real("scenario", "miss_prob", s.miss_prob);
  const auto dim = doc.integer("scenario", "embedding_dim", 0);
  const auto n_agents = doc.integer("scenario", "n_agents", 0);
  if (dim < 0 || n_agents < 0) throw ValidationError(source + ": embedding_dim and n_agents must be non-negative");
  s.embedding_dim = static_cast<std::size_t>(dim);
  s.n_random_agents = static_cast<std::size_t>(n_agents);
  s.embedding_noise = doc.real("scenario", "embedding_noise", s.embedding_noise);
  s.gap_frames = doc.integer("scenario", "gap_frames", s.gap_frames);
  s.image_width = doc.real("scenario", "image_width", s.image_width);
  s.image_height = doc.real("scenario", "image_height", s.image_height);

  s.calibration.phi = doc.real("calibration", "phi", s.calibration.phi);
  s.calibration.omega = doc.real("calibration", "omega", s.calibration.omega);
  s.calibration.delta_deg = doc.real("calibration", "delta_deg", s.calibration.delta_deg);
  s.calibration.x0 = doc.real("calibration", "x0", s.calibration.x0);
  s.calibration.y0 = doc.real("calibration", "y0", s.calibration.y0);

  s.loi.a = {s.image_width / 2, 0.0};
  s.loi.b = {s.image_width / 2, s.image_height};
  s.loi.a = {doc.real("loi", "x1", s.loi.a.x), doc.real("loi", "y1", s.loi.a.y)};
  s.loi.b = {doc.real("loi", "x2", s.loi.b.x), doc.real("loi", "y2", s.loi.b.y)};
  s.loi.direction = static_cast<int>(std::clamp<std::int64_t>(doc.integer("loi", "direction", 0), -2, 2));

  std::sort(agent_sections.begin(), agent_sections.end());
  std::map<std::int64_t, std::size_t> agent_index;
  const auto frames = s.frame_count();
  for (const auto& [k, name] : agent_sections) {
    doc.check_keys(name, {"class", "spawn_frame", "exit_frame", "x", "y", "vx", "vy", "w_px", "h_px"});
    for (const char* key : {"class", "x", "y", "vx", "vy"}) {
      if (!doc.has(name, key)) throw ValidationError(source + ": [" + name + "] needs " + key);
    }
    AgentSpec a;
    a.class_id = static_cast<int>(std::clamp<std::int64_t>(doc.integer(name, "class", 0), -1, 1'000'000));
    a.spawn_frame = doc.integer(name, "spawn_frame", 1);
    a.exit_frame = doc.integer(name, "exit_frame", frames);
    a.position = {doc.real(name, "x", 0), doc.real(name, "y", 0)};
    a.velocity = {doc.real(name, "vx", 0), doc.real(name, "vy", 0)};
    a.w_px = doc.real(name, "w_px", a.w_px);
    a.h_px = doc.real(name, "h_px", a.h_px);
    agent_index[k] = s.agents.size();
    s.agents.push_back(a);
  }
  for (const auto& name : occlusion_sections) {
    doc.check_keys(name, {"agent", "first_frame", "last_frame"});
    for (const char* key : {"agent", "first_frame", "last_frame"}) {
      if (!doc.has(name, key)) throw ValidationError(source + ": [" + name + "] needs " + key);
    }
    const auto it = agent_index.find(doc.integer(name, "agent", 0));
    if (it == agent_index.end()) throw ValidationError(source + ": [" + name + "] names an unknown agent");
    s.occlusions.push_back({it->second, doc.integer(name, "first_frame", 0), doc.integer(name, "last_frame", 0)});
  }
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return s;
}

Scenario generate(const ScenarioSpec& spec, const traffic::LineOfInterest& loi, double interval_s) {
  spec.validate();
  loi.validate();
  Rng rng(spec.seed);
  const auto frames = spec.frame_count();

  std::vector<AgentSpec> agents = spec.agents;
  const auto random_agents = place_random_agents(spec, rng);
  agents.insert(agents.end(), random_agents.begin(), random_agents.end());

  std::vector<OcclusionWindow> occlusions = spec.occlusions;
  if (spec.gap_frames > 0) {
    for (std::size_t k = 0; k < agents.size(); ++k) {
      const auto lo = agents[k].spawn_frame + kGapLead;
      const auto hi = agents[k].exit_frame - spec.gap_frames - kGapLead;
      if (hi < lo) continue;
      const auto first = uniform_int(rng, lo, hi);
      occlusions.push_back({k, first, first + spec.gap_frames - 1});
    }
  }
  std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> hidden(agents.size());
  for (const auto& o : occlusions) hidden[o.agent].emplace_back(o.first_frame, o.last_frame);

  std::vector<std::vector<double>> centers(agents.size());
  if (spec.embedding_dim > 0) {
    for (auto& c : centers) c = random_unit(rng, spec.embedding_dim);
  }

  Scenario out;
  out.frames.resize(static_cast<std::size_t>(frames));
  out.agent_of.resize(static_cast<std::size_t>(frames));
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  boost::random::bernoulli_distribution<double> miss(spec.miss_prob);
  boost::random::uniform_real_distribution<double> conf(0.5, 1.0);

  for (std::int64_t f = 1; f <= frames; ++f) {
    auto& batch = out.frames[static_cast<std::size_t>(f - 1)];
    auto& owners = out.agent_of[static_cast<std::size_t>(f - 1)];
    batch.frame = f;
    for (std::size_t k = 0; k < agents.size(); ++k) {
      const auto& a = agents[k];
      if (f < a.spawn_frame || f > a.exit_frame) continue;
      if (spec.miss_prob > 0.0 && miss(rng)) continue;
      const bool occluded = std::any_of(hidden[k].begin(), hidden[k].end(),
                                        [f](const auto& w) { return f >= w.first && f <= w.second; });
      if (occluded) continue;

      const Point c = calib::to_image(a.position_at(f, spec.fps), spec.calibration);
      double u = c.x;
      double v = c.y;
      double w = a.w_px;
      double h = a.h_px;
      if (spec.noise_px > 0.0) {
        u += spec.noise_px * normal(rng);
        v += spec.noise_px * normal(rng);
        w = std::max(1.0, w + spec.noise_px * normal(rng));
        h = std::max(1.0, h + spec.noise_px * normal(rng));
      }
      Detection d;
      d.frame = f;
      d.class_id = a.class_id;
      d.box = {u - 0.5 * w, v - 0.5 * h, w, h};
      d.confidence = conf(rng);
      if (spec.embedding_dim > 0) {
        std::vector<double> e = centers[k];
        if (spec.embedding_noise > 0.0) {
          for (auto& x : e) x += spec.embedding_noise * normal(rng);
        }
        d.appearance = normalize_appearance(e);
      }
      batch.detections.push_back(std::move(d));
      owners.push_back(k);
    }
  }
  out.truth = build_truth(std::move(agents), spec, loi, interval_s);
  return out;
}

Scenario generate(const ScenarioSpec& spec) {
  spec.validate();
  return generate(spec, traffic::LineOfInterest::from_image(spec.loi.a, spec.loi.b, spec.loi.direction, spec.calibration),
                  spec.interval_s);
}

void write_agents(std::ostream& out, const GroundTruth& truth) {
  using textio::format_exact;
  out << "agent\tclass\tspawn_frame\texit_frame\tx\ty\tvx\tvy\tw_px\th_px\tcrossing_frame\n";
  for (std::size_t k = 0; k < truth.agents.size(); ++k) {
    const auto& t = truth.agents[k];
    const auto& a = t.agent;
    out << k + 1 << '\t' << a.class_id << '\t' << a.spawn_frame << '\t' << a.exit_frame << '\t'
        << format_exact(a.position.x) << '\t' << format_exact(a.position.y) << '\t' << format_exact(a.velocity.x) << '\t'
        << format_exact(a.velocity.y) << '\t' << format_exact(a.w_px) << '\t' << format_exact(a.h_px) << '\t'
        << (t.crossing_frame ? std::to_string(*t.crossing_frame) : std::string("NA")) << '\n';
  }
}

}  // namespace mixtrack::synth
