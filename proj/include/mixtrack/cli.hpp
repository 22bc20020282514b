#pragma once

// Subcommand implementations behind the mixtrack executable. Each returns
// the process exit code and throws mixtrack::Error subclasses on failure.

#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mixtrack/config.hpp"
#include "mixtrack/detstream.hpp"
#include "mixtrack/tracker.hpp"
#include "mixtrack/traffic.hpp"

namespace mixtrack::cli {

/// Called once per frame, gap frames included, after the tracker step.
using FrameObserver = std::function<void(const FrameBatch&, std::span<const tracking::TrackSnapshot>)>;

struct PipelineResult {
  std::int64_t frames = 0;  // last frame processed
  double duration_s = 0.0;
  std::vector<traffic::IntervalMeasurement> intervals;
};

/// Streams detections through tracker, trajectory assembly and interval
/// measurement. Confirmed track states are written to tracks_out.
PipelineResult run_pipeline(std::istream& detections, const config::RunConfig& config, std::ostream& tracks_out,
                            const FrameObserver& observe = {}, const std::string& source = "<detections>");

/// Header plus one row per confirmed track per frame.
void write_tracks_header(std::ostream& out);

config::RunConfig load_config_file(const std::filesystem::path& path);

struct TrackArgs {
  std::string detections;  // "-" reads standard input
  std::optional<std::filesystem::path> config;
  std::filesystem::path out_dir = ".";
};
int cmd_track(const TrackArgs& args);

struct EvalArgs {
  std::filesystem::path pred;
  std::filesystem::path gt;
  double iou = 0.5;
  std::optional<std::filesystem::path> classes;
  /// Report and confusion matrix files go here; standard output otherwise.
  std::optional<std::filesystem::path> out_dir;
};
int cmd_eval(const EvalArgs& args, std::ostream& stdout_sink);

struct StatsArgs {
  std::filesystem::path measured;
  std::filesystem::path truth;
  std::optional<std::filesystem::path> out_dir;
};
int cmd_stats(const StatsArgs& args, std::ostream& stdout_sink);

/// Per-class and pooled agreement statistics between two interval files.
/// Rows are paired on (interval, class); both files must share the same
/// interval timing.
void write_stats(std::ostream& out, std::span<const traffic::IntervalRow> measured,
                 std::span<const traffic::IntervalRow> truth);

struct SynthArgs {
  std::filesystem::path spec;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = ".";
};
int cmd_synth(const SynthArgs& args);

int cmd_print_config(std::ostream& out);

/// Parses argv and dispatches. Errors are reported on err as one line.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace mixtrack::cli
