#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mixtrack/error.hpp"
#include "mixtrack/traffic.hpp"

using namespace mixtrack;
using namespace mixtrack::traffic;
using tracking::TrackSnapshot;
using tracking::TrackStatus;

namespace {

const LineOfInterest kHorizontal{{-1, 0}, {1, 0}, 0};

TrackSnapshot snap(std::int64_t frame, std::int64_t id, double u, double v, bool matched = true,
                   TrackStatus status = TrackStatus::Confirmed) {
  TrackSnapshot s;
  s.frame = frame;
  s.id = id;
  s.status = status;
  s.u = u;
  s.v = v;
  s.box = BBox::from_center(u, v, 1.0, 10.0);
  if (matched) s.detection = 0;
  return s;
}

// Straight line through the vertical LoI x = 0 at the given frame.
Trajectory crossing_at(std::int64_t id, int cls, std::int64_t frame) {
  Trajectory t{id, cls, {}};
  for (std::int64_t f = frame - 3; f <= frame + 2; ++f) t.points.push_back({f, -0.5 + static_cast<double>(f - frame + 1), 0.0});
  return t;
}

const LineOfInterest kVertical{{0, -10}, {0, 10}, 0};

Trajectory line(std::int64_t id, std::int64_t first, std::int64_t last, Point start, Point step) {
  Trajectory t{id, 0, {}};
  for (auto f = first; f <= last; ++f) {
    const double k = static_cast<double>(f - first);
    t.points.push_back({f, start.x + k * step.x, start.y + k * step.y});
  }
  return t;
}

}  // namespace

TEST(Assemble, GroupsByTrack) {
  std::vector<TrackSnapshot> snaps;
  for (std::int64_t f = 1; f <= 5; ++f) {
    snaps.push_back(snap(f, 1, 10.0 * f, 1.0));
    if (f % 2 == 1) snaps.push_back(snap(f, 2, 3.0, 4.0 * f));
  }
  const auto trajs = assemble_trajectories(snaps, calib::CalibrationParams::identity());
  ASSERT_EQ(trajs.size(), 2u);
  EXPECT_EQ(trajs[0].track_id, 1);
  ASSERT_EQ(trajs[0].points.size(), 5u);
  EXPECT_EQ(trajs[1].points.size(), 3u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(trajs[0].points[i].frame, static_cast<std::int64_t>(i + 1));
    EXPECT_EQ(trajs[0].points[i].x, 10.0 * static_cast<double>(i + 1));
    EXPECT_EQ(trajs[0].points[i].y, 1.0);
  }
}

TEST(Assemble, SkipsCoastedPointsAndUnconfirmedTracks) {
  std::vector<TrackSnapshot> snaps{snap(1, 1, 0, 0, true, TrackStatus::Tentative), snap(2, 1, 1, 0, true),
                                   snap(3, 1, 2, 0, false), snap(1, 2, 5, 5, true, TrackStatus::Tentative)};
  const auto trajs = assemble_trajectories(snaps, calib::CalibrationParams::identity());
  ASSERT_EQ(trajs.size(), 1u);
  EXPECT_EQ(trajs[0].points.size(), 2u);
}

TEST(Assemble, AppliesCalibration) {
  const calib::CalibrationParams p{2.0, 4.0, 90.0, 10.0, 20.0};
  const std::vector<TrackSnapshot> snaps{snap(1, 1, 8, 8)};
  const auto t = assemble_trajectories(snaps, p)[0];
  EXPECT_EQ(t.points[0].x, 14.0);
  EXPECT_EQ(t.points[0].y, 22.0);
}

TEST(Assemble, StreamingBuilderMatchesBatch) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> coin(0, 3);
  std::vector<std::vector<TrackSnapshot>> frames;
  std::vector<TrackSnapshot> all;
  for (std::int64_t f = 1; f <= 60; ++f) {
    std::vector<TrackSnapshot> frame;
    for (std::int64_t id = 1 + f / 20; id <= 3 + f / 20; ++id) {
      frame.push_back(snap(f, id, static_cast<double>(f * id), 2.0, coin(rng) != 0,
                           coin(rng) == 0 ? TrackStatus::Tentative : TrackStatus::Confirmed));
    }
    all.insert(all.end(), frame.begin(), frame.end());
    frames.push_back(frame);
  }
  const auto batch = assemble_trajectories(all, calib::CalibrationParams::identity());
  TrajectoryBuilder builder(calib::CalibrationParams::identity());
  std::vector<Trajectory> streamed;
  for (const auto& frame : frames) {
    for (auto& t : builder.feed(frame)) streamed.push_back(std::move(t));
  }
  for (auto& t : builder.finish()) streamed.push_back(std::move(t));
  std::sort(streamed.begin(), streamed.end(), [](const auto& a, const auto& b) { return a.track_id < b.track_id; });
  ASSERT_EQ(streamed.size(), batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_EQ(streamed[i].track_id, batch[i].track_id);
    ASSERT_EQ(streamed[i].points.size(), batch[i].points.size());
    for (std::size_t k = 0; k < batch[i].points.size(); ++k) EXPECT_EQ(streamed[i].points[k].x, batch[i].points[k].x);
  }
}

TEST(SegmentCrossing, Examples) {
  EXPECT_TRUE(segment_crosses({0, -1}, {0, 1}, kHorizontal));
  EXPECT_FALSE(segment_crosses({5, 1}, {5, 2}, kHorizontal));
  EXPECT_TRUE(segment_crosses({0, 1}, {0, 0}, kHorizontal));
  EXPECT_TRUE(segment_crosses({0.5, 1}, {1, 0}, kHorizontal));   // touches an endpoint
  EXPECT_TRUE(segment_crosses({-3, 0}, {0, 0}, kHorizontal));    // collinear overlap
  EXPECT_FALSE(segment_crosses({-3, 0}, {-2, 0}, kHorizontal));  // collinear, disjoint
  EXPECT_FALSE(segment_crosses({2, -1}, {2, 1}, kHorizontal));   // passes beyond the end
}

TEST(SegmentCrossing, DirectionFilter) {
  LineOfInterest loi = kHorizontal;
  loi.direction = 1;
  EXPECT_TRUE(counts_as_crossing({0, -1}, {0, 1}, loi));
  EXPECT_FALSE(counts_as_crossing({0, 1}, {0, -1}, loi));
  loi.direction = -1;
  EXPECT_TRUE(counts_as_crossing({0, 1}, {0, -1}, loi));
}

TEST(LineOfInterest, RejectsDegenerateSegment) {
  EXPECT_THROW((LineOfInterest{{1, 1}, {1, 1}, 0}).validate(), ValidationError);
  EXPECT_THROW((LineOfInterest{{0, 0}, {1, 1}, 2}).validate(), ValidationError);
}

TEST(CountAndFlow, TwelveCrossingsPerMinute) {
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 12; ++i) trajs.push_back(crossing_at(i + 1, 3, 100 + 50 * i));
  const auto m = count_and_flow(trajs, kVertical, 60.0, 25.0, 60.0);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].classes.at(3).count, 12);
  EXPECT_EQ(m[0].classes.at(3).flow_vph, 720.0);
}

TEST(CountAndFlow, FirstCrossingOnly) {
  Trajectory t{1, 0, {}};
  const double xs[] = {-1, 1, -1, 1, -1, 1};
  for (int i = 0; i < 6; ++i) t.points.push_back({i + 1, xs[i], 0});
  const auto m = count_and_flow(std::vector{t}, kVertical, 60.0, 25.0, 60.0);
  EXPECT_EQ(m[0].classes.at(0).count, 1);
}

TEST(CountAndFlow, AttributedToLaterFrame) {
  // Crossing between frames 1500 (t = 60 s, interval 1) and 1499.
  Trajectory t{1, 0, {{1499, -0.5, 0}, {1500, 0.5, 0}}};
  auto m = count_and_flow(std::vector{t}, kVertical, 60.0, 25.0, 120.0);
  EXPECT_FALSE(m[0].classes.count(0));
  EXPECT_EQ(m[1].classes.at(0).count, 1);
  // A point exactly on the LoI closes the crossing on that frame.
  t = {1, 0, {{1499, -0.5, 0}, {1500, 0.0, 0}, {1501, 0.5, 0}}};
  m = count_and_flow(std::vector{t}, kVertical, 60.0, 25.0, 120.0);
  EXPECT_EQ(m[1].classes.at(0).count, 1);
}

TEST(CountAndFlow, TimeShiftByWholeIntervalsMovesCounts) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::int64_t> frame(10, 1400);
  std::uniform_int_distribution<int> cls(0, 2);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 40; ++i) trajs.push_back(crossing_at(i + 1, cls(rng), frame(rng)));
  auto shifted = trajs;
  for (auto& t : shifted)
    for (auto& p : t.points) p.frame += 2 * 1500;
  const auto a = count_and_flow(trajs, kVertical, 60.0, 25.0, 300.0);
  const auto b = count_and_flow(shifted, kVertical, 60.0, 25.0, 300.0);
  for (int i = 0; i < 3; ++i) {
    for (const auto& [c, ci] : a[i].classes) {
      EXPECT_EQ(b[i + 2].classes.at(c).count, ci.count);
      EXPECT_EQ(b[i + 2].classes.at(c).flow_vph, ci.flow_vph);
    }
  }
  std::int64_t total = 0;
  for (const auto& m : a)
    for (const auto& [c, ci] : m.classes) total += ci.count;
  EXPECT_LE(total, 40);
}

TEST(IntervalGrid, PartialLastIntervalAndEndFrame) {
  const IntervalGrid g(60.0, 25.0, 150.0);
  ASSERT_EQ(g.count(), 3);
  EXPECT_EQ(g.end(2), 150.0);
  EXPECT_EQ(g.index_of(1), 0);
  EXPECT_EQ(g.index_of(1499), 0);
  EXPECT_EQ(g.index_of(1500), 1);
  EXPECT_EQ(g.index_of(3750), 2);  // exactly at the end
  EXPECT_FALSE(g.index_of(3751));
  EXPECT_EQ(IntervalGrid(60.0, 25.0, 120.0).count(), 2);
  EXPECT_EQ(IntervalGrid(60.0, 25.0, 0.0).count(), 0);
}

TEST(CountAndFlow, PartialIntervalUsesActualDuration) {
  const auto m = count_and_flow(std::vector{crossing_at(1, 0, 3600)}, kVertical, 60.0, 25.0, 150.0);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[2].duration(), 30.0);
  EXPECT_EQ(m[2].classes.at(0).flow_vph, 120.0);
}

TEST(IntervalSpeed, Examples) {
  const auto t = line(1, 0, 25, {0, 0}, {0.4, 0});
  EXPECT_NEAR(*interval_speed(t, 0.0, 2.0, 25.0), 10.0, 1e-12);
  EXPECT_FALSE(interval_speed(t, 5.0, 6.0, 25.0));
  const auto still = line(2, 0, 25, {3, 3}, {0, 0});
  EXPECT_EQ(*interval_speed(still, 0.0, 2.0, 25.0), 0.0);
  const auto single = line(3, 10, 10, {0, 0}, {1, 0});
  EXPECT_FALSE(interval_speed(single, 0.0, 2.0, 25.0));
}

TEST(IntervalSpeed, UsesOnlyInIntervalPoints) {
  // 1 m/frame for frames 1..24, then 3 m/frame.
  Trajectory t{1, 0, {}};
  double x = 0.0;
  for (std::int64_t f = 1; f <= 50; ++f) {
    t.points.push_back({f, x, 0.0});
    x += f < 25 ? 1.0 : 3.0;
  }
  EXPECT_NEAR(*interval_speed(t, 0.0, 1.0, 25.0), 25.0, 1e-12);
  EXPECT_NEAR(*interval_speed(t, 1.0, 2.0, 25.0), 75.0, 1e-12);
}

TEST(IntervalSpeed, InvariantToRigidMotionAndScalesWithFrameRate) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_real_distribution<double> ang(0.0, 6.283185307179586);
  for (int trial = 0; trial < 100; ++trial) {
    Trajectory t{1, 0, {}};
    Point p{n(rng), n(rng)};
    for (std::int64_t f = 1; f <= 40; ++f) {
      t.points.push_back({f, p.x, p.y});
      p = {p.x + n(rng), p.y + n(rng)};
    }
    const double base = *interval_speed(t, 0.0, 10.0, 25.0);
    const double th = ang(rng);
    const double dx = 100 * n(rng);
    const double dy = 100 * n(rng);
    Trajectory moved = t;
    for (auto& q : moved.points) {
      const double x = q.x * std::cos(th) - q.y * std::sin(th) + dx;
      const double y = q.x * std::sin(th) + q.y * std::cos(th) + dy;
      q.x = x;
      q.y = y;
    }
    EXPECT_NEAR(*interval_speed(moved, 0.0, 10.0, 25.0), base, 1e-9 * std::max(1.0, base));
    EXPECT_NEAR(*interval_speed(t, 0.0, 10.0, 50.0), 2.0 * base, 1e-9 * std::max(1.0, base));
  }
}

TEST(Aggregate, MeanInKilometresPerHour) {
  std::vector<IntervalMeasurement> m(1);
  m[0].classes[0].speeds = {{2, 20.0}, {1, 10.0}};
  m[0].classes[1].speeds = {{3, 12.5}};
  m[0].classes[2].count = 1;
  aggregate(m);
  EXPECT_EQ(*m[0].classes[0].mean_speed_kmh, 54.0);
  EXPECT_EQ(*m[0].classes[1].mean_speed_kmh, 45.0);
  EXPECT_FALSE(m[0].classes[2].mean_speed_kmh);
  EXPECT_EQ(m[0].classes[0].speeds[0].track_id, 1);
}

TEST(Measure, StreamingAccumulatorMatchesBatch) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::int64_t> frame(5, 3700);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 60; ++i) {
    auto t = crossing_at(i + 1, cls(rng), frame(rng));
    for (auto& p : t.points) p.y = 0.01 * i;
    trajs.push_back(t);
  }
  const MeasureParams params{60.0, 25.0};
  const auto batch = measure(trajs, kVertical, params, 150.0);
  TrafficAccumulator acc(kVertical, params);
  for (const auto& t : trajs) acc.add(t);
  const auto streamed = acc.finish(150.0);
  std::ostringstream a, b;
  write_intervals(a, batch);
  write_intervals(b, streamed);
  EXPECT_EQ(a.str(), b.str());

  // Speeds agree with the direct per-interval filter.
  for (const auto& m : batch) {
    for (const auto& [c, ci] : m.classes) {
      for (const auto& s : ci.speeds) {
        const auto& t = trajs[static_cast<std::size_t>(s.track_id - 1)];
        const double end = m.index + 1 == static_cast<int>(batch.size()) ? std::nextafter(m.end_s, 1e9) : m.end_s;
        EXPECT_NEAR(s.speed_mps, *interval_speed(t, m.start_s, end, 25.0), 1e-12);
      }
    }
  }
}

TEST(IntervalsFile, FlowAndSpeedExamplesPrintExactly) {
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 12; ++i) trajs.push_back(crossing_at(i + 1, 3, 100 + 50 * i));
  trajs.push_back(line(20, 1, 26, {5, 5}, {0.4, 0}));  // 10 m over 1 s
  trajs.back().class_id = 8;
  const auto m = measure(trajs, kVertical, {60.0, 25.0}, 60.0);
  std::ostringstream out;
  write_intervals(out, m);
  std::istringstream in(out.str());
  const auto rows = read_intervals(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].class_id, 3);
  EXPECT_EQ(rows[0].flow_vph, 720.0);
  EXPECT_EQ(rows[1].class_id, 8);
  EXPECT_EQ(*rows[1].mean_speed_kmh, 36.0);
  EXPECT_NE(out.str().find("\t720\t"), std::string::npos);
  EXPECT_NE(out.str().find("\t36\t1\n"), std::string::npos);
}

TEST(IntervalsFile, IdleIntervalsGetPlaceholderRows) {
  const auto m = measure(std::vector<Trajectory>{}, kVertical, {60.0, 25.0}, 90.0);
  std::ostringstream out;
  write_intervals(out, m);
  EXPECT_EQ(out.str(),
            "interval\tt_start_s\tt_end_s\tclass\tcount\tflow_vph\tmean_speed_kmh\tn_speed_tracks\n"
            "0\t0\t60\t-\t0\t0\tNA\t0\n"
            "1\t60\t90\t-\t0\t0\tNA\t0\n");
  std::istringstream in(out.str());
  const auto rows = read_intervals(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].class_id, IntervalRow::kNoClass);
  EXPECT_EQ(rows[1].end_s, 90.0);
}

TEST(IntervalsFile, MalformedRowsNameTheLine) {
  std::istringstream in("interval\tt\n0\t0\t60\t1\t2\n");
  try {
    read_intervals(in, "x.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}
