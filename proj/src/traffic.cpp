#include "mixtrack/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mixtrack/error.hpp"
#include "mixtrack/textio.hpp"

namespace mixtrack::traffic {

namespace {

double orient(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

int sign(double v) { return (v > 0.0) - (v < 0.0); }

// c is collinear with a-b; is it within their bounding box?
bool on_segment(Point a, Point b, Point c) {
  return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= c.y &&
         c.y <= std::max(a.y, b.y);
}

double dist(Point a, Point b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace

void LineOfInterest::validate() const {
  if (a == b) throw ValidationError("line of interest endpoints coincide");
  if (direction < -1 || direction > 1) throw ValidationError("line of interest direction must be -1, 0 or 1");
}

LineOfInterest LineOfInterest::from_image(Point a_px, Point b_px, int direction, const calib::CalibrationParams& p) {
  LineOfInterest loi{calib::to_world(a_px, p), calib::to_world(b_px, p), direction};
  loi.validate();
  return loi;
}

bool segment_crosses(Point p1, Point p2, const LineOfInterest& loi) {
  const Point a = loi.a;
  const Point b = loi.b;
  const int o1 = sign(orient(p1, p2, a));
  const int o2 = sign(orient(p1, p2, b));
  const int o3 = sign(orient(a, b, p1));
  const int o4 = sign(orient(a, b, p2));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, a)) return true;
  if (o2 == 0 && on_segment(p1, p2, b)) return true;
  if (o3 == 0 && on_segment(a, b, p1)) return true;
  if (o4 == 0 && on_segment(a, b, p2)) return true;
  return false;
}

bool counts_as_crossing(Point p1, Point p2, const LineOfInterest& loi) {
  if (!segment_crosses(p1, p2, loi)) return false;
  if (loi.direction == 0) return true;
  const double c = (loi.b.x - loi.a.x) * (p2.y - p1.y) - (loi.b.y - loi.a.y) * (p2.x - p1.x);
  return sign(c) == loi.direction;
}

std::vector<Trajectory> assemble_trajectories(std::span<const tracking::TrackSnapshot> snapshots,
                                              const calib::CalibrationParams& p, AssembleOptions options) {
  struct Acc {
    Trajectory t;
    bool confirmed = false;
  };
  std::map<std::int64_t, Acc> by_id;
  for (const auto& s : snapshots) {
    auto& acc = by_id[s.id];
    acc.t.track_id = s.id;
    acc.t.class_id = s.class_id;
    acc.confirmed = acc.confirmed || s.status == tracking::TrackStatus::Confirmed;
    if (options.matched_only && !s.matched()) continue;
    if (!acc.t.points.empty() && acc.t.points.back().frame >= s.frame) {
      throw ContractError("snapshots for track " + std::to_string(s.id) + " are not frame ordered");
    }
    const Point w = calib::to_world({s.u, s.v}, p);
    acc.t.points.push_back({s.frame, w.x, w.y});
  }
  std::vector<Trajectory> out;
  for (auto& [id, acc] : by_id) {
    if (options.confirmed_only && !acc.confirmed) continue;
    if (acc.t.points.empty()) continue;
    out.push_back(std::move(acc.t));
  }
  return out;
}

TrajectoryBuilder::TrajectoryBuilder(calib::CalibrationParams p, AssembleOptions options)
    : calib_(p), options_(options) {
  calib_.validate();
}

void TrajectoryBuilder::add(const tracking::TrackSnapshot& s) {
  auto& pending = live_[s.id];
  pending.trajectory.track_id = s.id;
  pending.trajectory.class_id = s.class_id;
  pending.confirmed = pending.confirmed || s.status == tracking::TrackStatus::Confirmed;
  if (options_.matched_only && !s.matched()) return;
  auto& pts = pending.trajectory.points;
  if (!pts.empty() && pts.back().frame >= s.frame) {
    throw ContractError("snapshots for track " + std::to_string(s.id) + " are not frame ordered");
  }
  const Point w = calib::to_world({s.u, s.v}, calib_);
  pts.push_back({s.frame, w.x, w.y});
}

std::optional<Trajectory> TrajectoryBuilder::release(Pending&& p) const {
  if (options_.confirmed_only && !p.confirmed) return std::nullopt;
  if (p.trajectory.points.empty()) return std::nullopt;
  return std::move(p.trajectory);
}

std::vector<Trajectory> TrajectoryBuilder::feed(std::span<const tracking::TrackSnapshot> frame_snapshots) {
  std::vector<std::int64_t> present;
  present.reserve(frame_snapshots.size());
  for (const auto& s : frame_snapshots) {
    add(s);
    present.push_back(s.id);
  }
  std::sort(present.begin(), present.end());

  std::vector<Trajectory> done;
  for (auto it = live_.begin(); it != live_.end();) {
    if (std::binary_search(present.begin(), present.end(), it->first)) {
      ++it;
      continue;
    }
    if (auto t = release(std::move(it->second))) done.push_back(std::move(*t));
    it = live_.erase(it);
  }
  return done;
}

std::vector<Trajectory> TrajectoryBuilder::finish() {
  std::vector<Trajectory> done;
  for (auto& [id, p] : live_) {
    if (auto t = release(std::move(p))) done.push_back(std::move(*t));
  }
  live_.clear();
  return done;
}

void MeasureParams::validate() const {
  if (!(interval_s > 0.0) || !std::isfinite(interval_s)) throw ValidationError("interval length must be positive");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ValidationError("frame rate must be positive");
}

IntervalGrid::IntervalGrid(double interval_s, double fps, double total_duration_s)
    : interval_s_(interval_s), fps_(fps), total_(total_duration_s), count_(0) {
  MeasureParams{interval_s, fps}.validate();
  if (!(total_duration_s >= 0.0) || !std::isfinite(total_duration_s)) throw ValidationError("total duration must be non-negative");
  if (total_ > 0.0) count_ = std::max(1, static_cast<int>(std::ceil(total_ / interval_s_ - 1e-9)));
}

double IntervalGrid::start(int i) const { return i * interval_s_; }

double IntervalGrid::end(int i) const { return i + 1 >= count_ ? total_ : (i + 1) * interval_s_; }

std::optional<int> IntervalGrid::index_of(std::int64_t frame) const {
  if (count_ == 0) return std::nullopt;
  const double t = static_cast<double>(frame) / fps_;
  if (t < 0.0 || t > total_) return std::nullopt;
  return static_cast<int>(std::min(std::floor(t / interval_s_), static_cast<double>(count_ - 1)));
}

std::optional<double> interval_speed(const Trajectory& traj, double start_s, double end_s, double fps) {
  if (!(fps > 0.0)) throw ValidationError("frame rate must be positive");
  double path = 0.0;
  const TrajectoryPoint* first = nullptr;
  const TrajectoryPoint* prev = nullptr;
  for (const auto& p : traj.points) {
    const double t = static_cast<double>(p.frame) / fps;
    if (t < start_s || t >= end_s) continue;
    if (prev) path += std::hypot(p.x - prev->x, p.y - prev->y);
    if (!first) first = &p;
    prev = &p;
  }
  if (!first || prev == first) return std::nullopt;
  const double elapsed = static_cast<double>(prev->frame - first->frame) / fps;
  return path / elapsed;
}

namespace detail {

TrackSummary summarize(const Trajectory& traj, const LineOfInterest* loi, double interval_s, double fps) {
  TrackSummary s;
  s.track_id = traj.track_id;
  s.class_id = traj.class_id;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const auto& p = traj.points[i];
    const Point here{p.x, p.y};
    if (i > 0) {
      const auto& q = traj.points[i - 1];
      if (q.frame >= p.frame) throw ContractError("trajectory frames must strictly increase");
      if (loi && !s.crossing_frame && counts_as_crossing({q.x, q.y}, here, *loi)) s.crossing_frame = p.frame;
    }
    const auto key = static_cast<std::int64_t>(std::floor((static_cast<double>(p.frame) / fps) / interval_s));
    auto [it, inserted] = s.windows.try_emplace(key);
    Window& w = it->second;
    if (inserted) {
      w.first_frame = p.frame;
      w.first = here;
    } else {
      w.path_m += dist(w.last, here);
    }
    w.last_frame = p.frame;
    w.last = here;
  }
  return s;
}

}  // namespace detail

namespace {

// Maps raw window keys onto the grid: windows past the end are dropped,
// except a point sitting exactly at the total duration, which joins the
// last interval.
std::vector<std::pair<int, detail::Window>> resolve(const detail::TrackSummary& s, const IntervalGrid& grid) {
  std::vector<std::pair<int, detail::Window>> out;
  for (const auto& [key, w] : s.windows) {
    if (key < grid.count()) {
      out.emplace_back(static_cast<int>(key), w);
      continue;
    }
    const auto idx = grid.index_of(w.first_frame);
    if (!idx) continue;
    if (!out.empty() && out.back().first == *idx) {
      auto& prev = out.back().second;
      prev.path_m += dist(prev.last, w.first);
      prev.last = w.first;
      prev.last_frame = w.first_frame;
    } else {
      out.emplace_back(*idx, detail::Window{w.first_frame, w.first_frame, w.first, w.first, 0.0});
    }
  }
  return out;
}

std::vector<IntervalMeasurement> empty_table(const IntervalGrid& grid) {
  std::vector<IntervalMeasurement> out(static_cast<std::size_t>(grid.count()));
  for (int i = 0; i < grid.count(); ++i) {
    out[static_cast<std::size_t>(i)].index = i;
    out[static_cast<std::size_t>(i)].start_s = grid.start(i);
    out[static_cast<std::size_t>(i)].end_s = grid.end(i);
  }
  return out;
}

void add_crossing(std::vector<IntervalMeasurement>& table, const detail::TrackSummary& s, const IntervalGrid& grid) {
  if (!s.crossing_frame) return;
  if (const auto idx = grid.index_of(*s.crossing_frame)) ++table[static_cast<std::size_t>(*idx)].classes[s.class_id].count;
}

void add_speeds(std::vector<IntervalMeasurement>& table, const detail::TrackSummary& s, const IntervalGrid& grid,
                double fps) {
  for (const auto& [idx, w] : resolve(s, grid)) {
    if (w.last_frame == w.first_frame) continue;
    const double elapsed = static_cast<double>(w.last_frame - w.first_frame) / fps;
    table[static_cast<std::size_t>(idx)].classes[s.class_id].speeds.push_back({s.track_id, w.path_m / elapsed});
  }
}

void fill_flows(std::vector<IntervalMeasurement>& table) {
  for (auto& m : table) {
    const double span = m.duration();
    for (auto& [cls, ci] : m.classes) ci.flow_vph = span > 0.0 ? static_cast<double>(ci.count) * 3600.0 / span : 0.0;
  }
}

}  // namespace

std::vector<IntervalMeasurement> count_and_flow(std::span<const Trajectory> trajectories, const LineOfInterest& loi,
                                                double interval_s, double fps, double total_duration_s) {
  loi.validate();
  const IntervalGrid grid(interval_s, fps, total_duration_s);
  auto table = empty_table(grid);
  for (const auto& t : trajectories) add_crossing(table, detail::summarize(t, &loi, interval_s, fps), grid);
  fill_flows(table);
  return table;
}

void add_interval_speeds(std::vector<IntervalMeasurement>& measurements, std::span<const Trajectory> trajectories,
                         const IntervalGrid& grid) {
  if (static_cast<int>(measurements.size()) != grid.count()) throw ContractError("interval table does not match grid");
  for (const auto& t : trajectories) {
    add_speeds(measurements, detail::summarize(t, nullptr, grid.interval_s(), grid.fps()), grid, grid.fps());
  }
}

void aggregate(std::vector<IntervalMeasurement>& measurements) {
  for (auto& m : measurements) {
    for (auto& [cls, ci] : m.classes) {
      std::sort(ci.speeds.begin(), ci.speeds.end(),
                [](const TrackSpeed& a, const TrackSpeed& b) { return a.track_id < b.track_id; });
      if (ci.speeds.empty()) {
        ci.mean_speed_kmh.reset();
        continue;
      }
      double sum = 0.0;
      for (const auto& s : ci.speeds) sum += s.speed_mps;
      ci.mean_speed_kmh = sum / static_cast<double>(ci.speeds.size()) * 3.6;
    }
  }
}

TrafficAccumulator::TrafficAccumulator(LineOfInterest loi, MeasureParams params) : loi_(loi), params_(params) {
  loi_.validate();
  params_.validate();
}

void TrafficAccumulator::add(const Trajectory& traj) {
  summaries_.push_back(detail::summarize(traj, &loi_, params_.interval_s, params_.fps));
}

std::vector<IntervalMeasurement> TrafficAccumulator::finish(double total_duration_s) const {
  const IntervalGrid grid(params_.interval_s, params_.fps, total_duration_s);
  auto table = empty_table(grid);
  for (const auto& s : summaries_) {
    add_crossing(table, s, grid);
    add_speeds(table, s, grid, params_.fps);
  }
  fill_flows(table);
  aggregate(table);
  return table;
}

std::vector<IntervalMeasurement> measure(std::span<const Trajectory> trajectories, const LineOfInterest& loi,
                                         const MeasureParams& params, double total_duration_s) {
  TrafficAccumulator acc(loi, params);
  for (const auto& t : trajectories) acc.add(t);
  return acc.finish(total_duration_s);
}

void write_intervals(std::ostream& out, std::span<const IntervalMeasurement> measurements) {
  out << "interval\tt_start_s\tt_end_s\tclass\tcount\tflow_vph\tmean_speed_kmh\tn_speed_tracks\n";
  for (const auto& m : measurements) {
    const bool idle = std::none_of(m.classes.begin(), m.classes.end(), [](const auto& kv) {
      return kv.second.count != 0 || !kv.second.speeds.empty();
    });
    if (idle) {
      out << m.index << '\t' << textio::format_report(m.start_s) << '\t' << textio::format_report(m.end_s)
          << "\t-\t0\t0\tNA\t0\n";
      continue;
    }
    for (const auto& [cls, ci] : m.classes) {
      if (ci.count == 0 && ci.speeds.empty()) continue;
      out << m.index << '\t' << textio::format_report(m.start_s) << '\t' << textio::format_report(m.end_s) << '\t'
          << cls << '\t' << ci.count << '\t' << textio::format_report(ci.flow_vph) << '\t'
          << (ci.mean_speed_kmh ? textio::format_report(*ci.mean_speed_kmh) : std::string("NA")) << '\t'
          << ci.speeds.size() << '\n';
    }
  }
}

std::vector<IntervalRow> read_intervals(std::istream& in, const std::string& source) {
  std::vector<IntervalRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = textio::trim(line);
    if (t.empty() || t.front() == '#' || t.starts_with("interval")) continue;
    const auto f = textio::split(t, '\t');
    if (f.size() != 8) throw ParseError(source, line_no, "expected 8 tab-separated columns, got " + std::to_string(f.size()));
    IntervalRow r;
    std::int64_t iv = 0;
    std::int64_t cls = 0;
    if (!textio::parse_int(f[0], iv) || iv < 0) throw ParseError(source, line_no, "bad interval index");
    if (!textio::parse_real(f[1], r.start_s) || !textio::parse_real(f[2], r.end_s)) throw ParseError(source, line_no, "bad interval bounds");
    if (textio::trim(f[3]) == "-") cls = IntervalRow::kNoClass;
    else if (!textio::parse_int(f[3], cls) || cls < 0) throw ParseError(source, line_no, "bad class id");
    if (!textio::parse_int(f[4], r.count) || r.count < 0) throw ParseError(source, line_no, "bad count");
    if (!textio::parse_real(f[5], r.flow_vph)) throw ParseError(source, line_no, "bad flow");
    if (textio::trim(f[6]) != "NA") {
      double v = 0.0;
      if (!textio::parse_real(f[6], v)) throw ParseError(source, line_no, "bad mean speed");
      r.mean_speed_kmh = v;
    }
    if (!textio::parse_int(f[7], r.n_speed_tracks) || r.n_speed_tracks < 0) throw ParseError(source, line_no, "bad speed track count");
    r.interval = static_cast<int>(iv);
    r.class_id = static_cast<int>(cls);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace mixtrack::traffic
