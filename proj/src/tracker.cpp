#include "mixtrack/tracker.hpp"

#include <algorithm>
#include <set>

#include "mixtrack/error.hpp"

namespace mixtrack::tracking {

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::Tentative: return "tentative";
    case TrackStatus::Confirmed: return "confirmed";
    case TrackStatus::Deleted: return "deleted";
  }
  return "?";
}

int class_of(const Track& track) {
  if (track.class_votes.empty()) throw ContractError("track " + std::to_string(track.id) + " has no class votes");
  int best = track.class_votes.begin()->first;
  std::int64_t best_votes = -1;
  // std::map iterates in ascending class id, so '>' keeps the lowest on ties.
  for (const auto& [cls, votes] : track.class_votes) {
    if (votes > best_votes) {
      best = cls;
      best_votes = votes;
    }
  }
  return best;
}

Tracker::Tracker(TrackerConfig config) : config_(std::move(config)), filter_(config_.noise) {
  if (config_.max_age < 0) throw ValidationError("max_age must be non-negative");
  if (config_.n_init < 1) throw ValidationError("n_init must be at least 1");
  if (config_.gallery_capacity == 0) throw ValidationError("gallery capacity must be positive");
  const auto& a = config_.association;
  if (a.lambda < 0.0 || a.lambda > 1.0) throw ValidationError("lambda must lie in [0,1]");
  if (!(a.motion_gate > 0.0) || !(a.appearance_gate > 0.0)) throw ValidationError("gating thresholds must be positive");
  if (!(config_.iou_max_distance > 0.0) || config_.iou_max_distance > 1.0) {
    throw ValidationError("IoU distance threshold must lie in (0,1]");
  }
}

namespace {

assoc::CostMatrix select_columns(const assoc::CostMatrix& full, const std::vector<std::size_t>& cols) {
  assoc::CostMatrix out(full.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto src = static_cast<Eigen::Index>(cols[c]);
    out.values.col(static_cast<Eigen::Index>(c)) = full.values.col(src);
    out.admissible.col(static_cast<Eigen::Index>(c)) = full.admissible.col(src);
  }
  return out;
}

void remove_matched(std::vector<std::size_t>& unmatched_dets, const std::vector<std::size_t>& taken) {
  std::set<std::size_t> drop(taken.begin(), taken.end());
  std::erase_if(unmatched_dets, [&](std::size_t j) { return drop.count(j) != 0; });
}

}  // namespace

void Tracker::match_cascade(std::span<const Detection> detections, std::vector<std::size_t>& unmatched_dets,
                            std::vector<std::pair<std::size_t, std::size_t>>& matches,
                            std::vector<char>& track_matched) {
  std::set<int> levels;
  for (const auto& t : tracks_) {
    if (t.status == TrackStatus::Confirmed) levels.insert(t.time_since_update);
  }

  for (int level : levels) {
    if (unmatched_dets.empty()) break;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
      if (tracks_[i].status == TrackStatus::Confirmed && tracks_[i].time_since_update == level) rows.push_back(i);
    }

    std::vector<assoc::TrackCandidate> candidates;
    candidates.reserve(rows.size());
    for (std::size_t i : rows) {
      assoc::TrackCandidate c;
      try {
        c.projection = filter_.project(tracks_[i].state);
      } catch (const NumericalError&) {
        c.projection.reset();
      }
      c.gallery = &tracks_[i].gallery;
      candidates.push_back(c);
    }

    const auto full = assoc::build_cost_matrix(candidates, detections, config_.association);
    const auto cost = select_columns(full, unmatched_dets);
    const auto result = assoc::solve_assignment(cost);
    std::vector<std::size_t> taken;
    for (const auto& [r, c] : result.matches) {
      const std::size_t ti = rows[r];
      const std::size_t dj = unmatched_dets[c];
      matches.emplace_back(ti, dj);
      track_matched[ti] = 1;
      taken.push_back(dj);
    }
    remove_matched(unmatched_dets, taken);
  }
}

void Tracker::match_iou(std::span<const Detection> detections, std::vector<std::size_t>& unmatched_dets,
                        std::vector<std::pair<std::size_t, std::size_t>>& matches,
                        std::vector<char>& track_matched) {
  if (unmatched_dets.empty()) return;
  std::vector<std::size_t> rows;
  std::vector<BBox> boxes;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    const auto& t = tracks_[i];
    if (track_matched[i]) continue;
    const bool eligible = t.status == TrackStatus::Tentative ||
                          (t.status == TrackStatus::Confirmed && t.time_since_update == 1);
    if (!eligible) continue;
    rows.push_back(i);
    boxes.push_back(t.state.box());
  }
  if (rows.empty()) return;

  const auto full = assoc::build_iou_cost_matrix(boxes, detections, config_.iou_max_distance);
  const auto cost = select_columns(full, unmatched_dets);
  const auto result = assoc::solve_assignment(cost);
  std::vector<std::size_t> taken;
  for (const auto& [r, c] : result.matches) {
    const std::size_t ti = rows[r];
    const std::size_t dj = unmatched_dets[c];
    matches.emplace_back(ti, dj);
    track_matched[ti] = 1;
    taken.push_back(dj);
  }
  remove_matched(unmatched_dets, taken);
}

void Tracker::apply_match(Track& track, const Detection& det, std::int64_t frame) {
  track.state = filter_.update(track.state, motion::to_measurement(det.box));
  if (det.has_appearance()) track.gallery.push(det.appearance);
  ++track.class_votes[det.class_id];
  ++track.hits;
  track.time_since_update = 0;
  track.history.push_back({frame, det.box});
  if (track.status == TrackStatus::Tentative && track.hits >= config_.n_init) track.status = TrackStatus::Confirmed;
}

std::vector<TrackSnapshot> Tracker::step(std::int64_t frame, std::span<const Detection> detections) {
  if (frame <= last_frame_) {
    throw ContractError("frame " + std::to_string(frame) + " does not follow frame " + std::to_string(last_frame_));
  }
  for (const auto& d : detections) {
    if (d.frame != frame) throw ContractError("detection from frame " + std::to_string(d.frame) + " in batch " + std::to_string(frame));
  }
  last_frame_ = frame;

  for (auto& t : tracks_) {
    t.state = filter_.predict(t.state);
    ++t.time_since_update;
  }

  std::vector<std::size_t> unmatched_dets(detections.size());
  for (std::size_t j = 0; j < detections.size(); ++j) unmatched_dets[j] = j;
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::vector<char> track_matched(tracks_.size(), 0);

  match_cascade(detections, unmatched_dets, matches, track_matched);
  match_iou(detections, unmatched_dets, matches, track_matched);

  std::vector<std::optional<std::size_t>> matched_det(tracks_.size());
  for (const auto& [ti, dj] : matches) {
    apply_match(tracks_[ti], detections[dj], frame);
    matched_det[ti] = dj;
  }
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    if (track_matched[i]) continue;
    auto& t = tracks_[i];
    if (t.status == TrackStatus::Tentative || t.time_since_update > config_.max_age) t.status = TrackStatus::Deleted;
  }

  for (std::size_t j : unmatched_dets) {
    const auto& det = detections[j];
    Track t{.id = next_id_++,
            .status = config_.n_init <= 1 ? TrackStatus::Confirmed : TrackStatus::Tentative,
            .state = filter_.initiate(det.box),
            .gallery = assoc::AppearanceGallery(config_.gallery_capacity),
            .class_votes = {{det.class_id, 1}},
            .hits = 1,
            .time_since_update = 0,
            .history = {{frame, det.box}}};
    if (det.has_appearance()) t.gallery.push(det.appearance);
    tracks_.push_back(std::move(t));
    matched_det.push_back(j);
  }

  std::vector<TrackSnapshot> out;
  out.reserve(tracks_.size());
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    const auto& t = tracks_[i];
    if (t.status == TrackStatus::Deleted) continue;
    TrackSnapshot s;
    s.frame = frame;
    s.id = t.id;
    s.status = t.status;
    s.class_id = class_of(t);
    s.detection = matched_det[i];
    s.box = s.detection ? detections[*s.detection].box : t.state.box();
    s.u = s.box.center_x();
    s.v = s.box.center_y();
    out.push_back(s);
  }

  std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::Deleted; });
  return out;
}

}  // namespace mixtrack::tracking
