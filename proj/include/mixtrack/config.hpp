#pragma once

// Run configuration: a sectioned key = value file.
//
//   [calibration]  phi omega delta_deg x0 y0
//                  or ref_true_x_m ref_true_y_m ref_apparent_x_px ref_apparent_y_px
//   [loi]          x1 y1 x2 y2 (pixels) direction
//   [tracking]     lambda t1 t2 max_age n_init gallery_capacity confidence_floor iou_max_distance
//   [measure]      interval_s fps duration_s
//   [io]           tracks_file intervals_file classes_file
//
// Unknown sections or keys are rejected.

#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include "mixtrack/calib.hpp"
#include "mixtrack/tracker.hpp"
#include "mixtrack/traffic.hpp"

namespace mixtrack::config {

struct LoiConfig {
  calib::Point a_px{0.0, 540.0};
  calib::Point b_px{1920.0, 540.0};
  int direction = 0;
};

struct IoConfig {
  std::string tracks_file = "tracks.txt";
  std::string intervals_file = "intervals.txt";
  std::string classes_file;  // empty: built-in class list
};

struct RunConfig {
  calib::CalibrationParams calibration;
  /// When set, phi and omega are derived from it.
  std::optional<calib::ReferenceObject> reference;
  LoiConfig loi;
  tracking::TrackerConfig tracking;
  double confidence_floor = 0.0;
  traffic::MeasureParams measure;
  /// Total duration; derived from the last frame when absent.
  std::optional<double> duration_s;
  IoConfig io;

  void validate() const;
  calib::CalibrationParams effective_calibration() const;
  traffic::LineOfInterest line_of_interest() const;
};

RunConfig load_run_config(std::istream& in, const std::string& source = "<config>");
/// Writes every field, defaults included; reloading yields the same config.
void write_run_config(std::ostream& out, const RunConfig& config);

}  // namespace mixtrack::config
