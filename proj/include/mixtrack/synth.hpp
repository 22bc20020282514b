#pragma once

// Synthetic traffic scenarios with closed-form ground truth.
//
// Agents move at constant world velocity and are projected into the image
// through the inverse calibration transform. Detections are those boxes
// with optional pixel noise, dropped during misses and occlusions.
//
// Scenario files use the sectioned key = value layout:
//
//   [scenario]     fps duration_s interval_s seed noise_px miss_prob
//                  embedding_dim embedding_noise gap_frames n_agents
//                  image_width image_height
//   [calibration]  phi omega delta_deg x0 y0
//   [loi]          x1 y1 x2 y2 (pixels) direction
//   [agent.<k>]    class spawn_frame exit_frame x y vx vy w_px h_px
//   [occlusion.<k>] agent first_frame last_frame
//
// n_agents adds randomly placed agents on horizontal image lanes after the
// explicit ones. gap_frames gives every agent one occlusion of that length
// once it has been visible for a few frames.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mixtrack/calib.hpp"
#include "mixtrack/detstream.hpp"
#include "mixtrack/traffic.hpp"

namespace mixtrack::synth {

struct AgentSpec {
  int class_id = 0;
  std::int64_t spawn_frame = 1;
  std::int64_t exit_frame = 1;  // last visible frame, inclusive
  calib::Point position;        // world metres at spawn_frame
  calib::Point velocity;        // world metres per second
  double w_px = 40.0;
  double h_px = 40.0;

  calib::Point position_at(std::int64_t frame, double fps) const;
};

struct OcclusionWindow {
  std::size_t agent = 0;  // index into the resolved agent list
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
};

struct LoiPixels {
  calib::Point a{960.0, 0.0};
  calib::Point b{960.0, 1080.0};
  int direction = 0;
};

struct ScenarioSpec {
  double fps = 25.0;
  double duration_s = 60.0;
  double interval_s = 60.0;
  std::uint64_t seed = 1;
  calib::CalibrationParams calibration{20.0, 20.0, 90.0, 0.0, 0.0};
  LoiPixels loi;
  double noise_px = 0.0;
  double miss_prob = 0.0;
  std::size_t embedding_dim = 0;
  double embedding_noise = 0.0;
  std::int64_t gap_frames = 0;
  std::size_t n_random_agents = 0;
  double image_width = 1920.0;
  double image_height = 1080.0;
  std::vector<AgentSpec> agents;
  std::vector<OcclusionWindow> occlusions;

  /// Frames 1..frame_count() make up the stream.
  std::int64_t frame_count() const;
  void validate() const;
};

ScenarioSpec load_scenario(std::istream& in, const std::string& source = "<scenario>");

struct AgentTruth {
  AgentSpec agent;
  /// Later frame of the segment on which the agent first counts as crossing.
  std::optional<std::int64_t> crossing_frame;
};

struct GroundTruth {
  std::vector<AgentTruth> agents;
  /// Speeds are keyed by agent number (index + 1).
  std::vector<traffic::IntervalMeasurement> intervals;
};

struct Scenario {
  std::vector<FrameBatch> frames;  // dense, frames 1..frame_count()
  /// Source agent index of every detection, parallel to frames[i].detections.
  std::vector<std::vector<std::size_t>> agent_of;
  GroundTruth truth;
};

/// Deterministic for a given spec (seed included).
Scenario generate(const ScenarioSpec& spec, const traffic::LineOfInterest& loi, double interval_s);
/// Uses the spec's own LoI and interval length.
Scenario generate(const ScenarioSpec& spec);

/// agent, class, spawn_frame, exit_frame, x, y, vx, vy, w_px, h_px, crossing_frame
void write_agents(std::ostream& out, const GroundTruth& truth);

}  // namespace mixtrack::synth
