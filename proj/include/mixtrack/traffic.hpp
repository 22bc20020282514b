#pragma once

// Classified flow and speed per time interval from calibrated trajectories.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <span>
#include <vector>

#include "mixtrack/calib.hpp"
#include "mixtrack/tracker.hpp"

namespace mixtrack::traffic {

using calib::Point;

struct TrajectoryPoint {
  std::int64_t frame;
  double x;  // world metres
  double y;
};

struct Trajectory {
  std::int64_t track_id = 0;
  int class_id = 0;
  std::vector<TrajectoryPoint> points;  // strictly increasing frames
};

struct LineOfInterest {
  Point a;
  Point b;
  /// 0 counts both directions; +1 / -1 keep only crossings whose motion
  /// has that sign of cross(b - a, p2 - p1).
  int direction = 0;

  void validate() const;
  /// Endpoints given in image pixels, mapped once into world coordinates.
  static LineOfInterest from_image(Point a_px, Point b_px, int direction, const calib::CalibrationParams& p);
};

/// Closed-segment intersection of p1-p2 with the LoI; collinear overlap
/// counts. Ignores the direction filter.
bool segment_crosses(Point p1, Point p2, const LineOfInterest& loi);

/// segment_crosses plus the LoI direction filter.
bool counts_as_crossing(Point p1, Point p2, const LineOfInterest& loi);

struct AssembleOptions {
  bool matched_only = true;    // skip coasted (predicted) positions
  bool confirmed_only = true;  // drop tracks that never reached Confirmed
};

/// Groups snapshots by track id and maps centroids to world coordinates.
/// Trajectories are returned in ascending id order; the class is the last
/// reported majority class.
std::vector<Trajectory> assemble_trajectories(std::span<const tracking::TrackSnapshot> snapshots,
                                              const calib::CalibrationParams& p, AssembleOptions options = {});

/// Streaming variant: feed one frame of snapshots at a time; trajectories
/// are released as soon as their track disappears from the live set.
class TrajectoryBuilder {
public:
  TrajectoryBuilder(calib::CalibrationParams p, AssembleOptions options = {});

  std::vector<Trajectory> feed(std::span<const tracking::TrackSnapshot> frame_snapshots);
  std::vector<Trajectory> finish();

private:
  struct Pending {
    Trajectory trajectory;
    bool confirmed = false;
  };
  void add(const tracking::TrackSnapshot& s);
  std::optional<Trajectory> release(Pending&& p) const;

  calib::CalibrationParams calib_;
  AssembleOptions options_;
  std::map<std::int64_t, Pending> live_;
};

struct TrackSpeed {
  std::int64_t track_id;
  double speed_mps;
};

struct ClassInterval {
  std::int64_t count = 0;
  double flow_vph = 0.0;
  std::vector<TrackSpeed> speeds;
  std::optional<double> mean_speed_kmh;
};

struct IntervalMeasurement {
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::map<int, ClassInterval> classes;

  double duration() const { return end_s - start_s; }
};

struct MeasureParams {
  double interval_s = 60.0;
  double fps = 25.0;

  void validate() const;
};

/// Partition of [0, total) into intervals of length T (last one possibly
/// shorter). Frame t sits at t / f seconds.
class IntervalGrid {
public:
  IntervalGrid(double interval_s, double fps, double total_duration_s);

  int count() const { return count_; }
  double interval_s() const { return interval_s_; }
  double fps() const { return fps_; }
  double total_s() const { return total_; }
  double start(int i) const;
  double end(int i) const;
  /// Interval holding the frame. A frame exactly at the total duration
  /// belongs to the last interval; frames past it have none.
  std::optional<int> index_of(std::int64_t frame) const;

private:
  double interval_s_;
  double fps_;
  double total_;
  int count_;
};

/// Path length over elapsed seconds for the points with start <= t/f < end.
/// Absent when fewer than two points fall in the window.
std::optional<double> interval_speed(const Trajectory& traj, double start_s, double end_s, double fps);

/// First-crossing counts and flows per interval and class. Each trajectory
/// contributes at most once, in the interval of the crossing segment's
/// later frame.
std::vector<IntervalMeasurement> count_and_flow(std::span<const Trajectory> trajectories, const LineOfInterest& loi,
                                                double interval_s, double fps, double total_duration_s);

/// Adds per-track speeds over each interval's in-interval points.
void add_interval_speeds(std::vector<IntervalMeasurement>& measurements, std::span<const Trajectory> trajectories,
                         const IntervalGrid& grid);

/// Fills mean_speed_kmh (mean of the per-track speeds times 3.6).
void aggregate(std::vector<IntervalMeasurement>& measurements);

namespace detail {

/// Contiguous run of a trajectory's points inside one interval.
struct Window {
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
  Point first;
  Point last;
  double path_m = 0.0;
};

/// What interval measurement needs from one trajectory: its counted
/// crossing frame and per-interval point windows keyed by floor(t / (f T)).
struct TrackSummary {
  std::int64_t track_id = 0;
  int class_id = 0;
  std::optional<std::int64_t> crossing_frame;
  std::map<std::int64_t, Window> windows;
};

/// Crossing detection is skipped when loi is null.
TrackSummary summarize(const Trajectory& traj, const LineOfInterest* loi, double interval_s, double fps);

}  // namespace detail

/// Streaming counterpart of count_and_flow + add_interval_speeds + aggregate.
class TrafficAccumulator {
public:
  TrafficAccumulator(LineOfInterest loi, MeasureParams params);

  void add(const Trajectory& traj);
  /// Builds the interval table for a stream of the given total duration.
  std::vector<IntervalMeasurement> finish(double total_duration_s) const;

private:
  LineOfInterest loi_;
  MeasureParams params_;
  std::vector<detail::TrackSummary> summaries_;  // per trajectory, O(intervals) each
};

/// Full measurement over trajectories already assembled.
std::vector<IntervalMeasurement> measure(std::span<const Trajectory> trajectories, const LineOfInterest& loi,
                                         const MeasureParams& params, double total_duration_s);

/// Tab-delimited: interval, t_start_s, t_end_s, class, count, flow_vph,
/// mean_speed_kmh, n_speed_tracks. One row per (interval, class) with any
/// activity, ordered by interval then class id. An interval without activity
/// gets a single zero row whose class is "-".
void write_intervals(std::ostream& out, std::span<const IntervalMeasurement> measurements);

struct IntervalRow {
  static constexpr int kNoClass = -1;  // placeholder row of an idle interval

  int interval = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  int class_id = 0;
  std::int64_t count = 0;
  double flow_vph = 0.0;
  std::optional<double> mean_speed_kmh;
  std::int64_t n_speed_tracks = 0;
};

std::vector<IntervalRow> read_intervals(std::istream& in, const std::string& source = "<intervals>");

}  // namespace mixtrack::traffic
