#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mixtrack/assoc.hpp"
#include "mixtrack/detstream.hpp"
#include "mixtrack/motion.hpp"

namespace mixtrack::tracking {

enum class TrackStatus { Tentative, Confirmed, Deleted };

const char* to_string(TrackStatus s);

struct HistoryEntry {
  std::int64_t frame;
  BBox box;
};

struct Track {
  std::int64_t id = 0;
  TrackStatus status = TrackStatus::Tentative;
  motion::TrackState state;
  assoc::AppearanceGallery gallery;
  std::map<int, std::int64_t> class_votes;
  int hits = 0;
  int time_since_update = 0;
  std::vector<HistoryEntry> history;  // matched detection boxes
};

/// Majority class over the track's lifetime, ties to the lowest id.
int class_of(const Track& track);

struct TrackSnapshot {
  std::int64_t frame = 0;
  std::int64_t id = 0;
  TrackStatus status = TrackStatus::Tentative;
  int class_id = 0;
  /// The associated detection box when matched this frame, otherwise the
  /// predicted box.
  BBox box;
  double u = 0.0;
  double v = 0.0;
  /// Index into this frame's detection batch when matched.
  std::optional<std::size_t> detection;

  bool matched() const { return detection.has_value(); }
};

struct TrackerConfig {
  assoc::AssociationParams association;
  motion::NoiseModel noise;
  int max_age = 3;
  int n_init = 3;
  std::size_t gallery_capacity = assoc::AppearanceGallery::kDefaultCapacity;
  double iou_max_distance = 0.7;
};

/// Sequential tracking-by-detection state machine. One instance per stream.
class Tracker {
public:
  explicit Tracker(TrackerConfig config = {});

  /// Advances one frame. Frames must strictly increase; skipped frames
  /// should be stepped with empty batches so tracks age correctly.
  std::vector<TrackSnapshot> step(std::int64_t frame, std::span<const Detection> detections);

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return config_; }
  std::int64_t last_frame() const { return last_frame_; }

private:
  void match_cascade(std::span<const Detection> detections, std::vector<std::size_t>& unmatched_dets,
                     std::vector<std::pair<std::size_t, std::size_t>>& matches, std::vector<char>& track_matched);
  void match_iou(std::span<const Detection> detections, std::vector<std::size_t>& unmatched_dets,
                 std::vector<std::pair<std::size_t, std::size_t>>& matches, std::vector<char>& track_matched);
  void apply_match(Track& track, const Detection& det, std::int64_t frame);

  TrackerConfig config_;
  motion::KalmanFilter filter_;
  std::vector<Track> tracks_;
  std::int64_t next_id_ = 1;
  std::int64_t last_frame_ = 0;
};

}  // namespace mixtrack::tracking
