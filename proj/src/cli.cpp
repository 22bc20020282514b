#include "mixtrack/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mixtrack/error.hpp"
#include "mixtrack/metrics.hpp"
#include "mixtrack/synth.hpp"
#include "mixtrack/textio.hpp"

namespace mixtrack::cli {

namespace fs = std::filesystem;
using textio::format_report;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ClassCatalog load_catalog(const std::optional<fs::path>& path) {
  if (!path) return ClassCatalog::defaults();
  auto in = textio::open_input(*path);
  return ClassCatalog::load(in, path->string());
}

}  // namespace

void write_tracks_header(std::ostream& out) { out << "frame\tid\tclass\tu\tv\tw\th\n"; }

PipelineResult run_pipeline(std::istream& detections, const config::RunConfig& config, std::ostream& tracks_out,
                            const FrameObserver& observe, const std::string& source) {
  config.validate();
  const auto calibration = config.effective_calibration();
  const auto loi = config.line_of_interest();

  ReaderOptions options;
  options.min_confidence = config.confidence_floor;
  options.source = source;
  DetectionReader reader(detections, options);
  tracking::Tracker tracker(config.tracking);
  traffic::TrajectoryBuilder builder(calibration);
  traffic::TrafficAccumulator accumulator(loi, config.measure);

  write_tracks_header(tracks_out);
  std::int64_t last = 0;
  auto process = [&](const FrameBatch& batch) {
    const auto snapshots = tracker.step(batch.frame, batch.detections);
    for (const auto& s : snapshots) {
      if (s.status != tracking::TrackStatus::Confirmed) continue;
      tracks_out << s.frame << '\t' << s.id << '\t' << s.class_id << '\t' << format_report(s.u) << '\t'
                 << format_report(s.v) << '\t' << format_report(s.box.w) << '\t' << format_report(s.box.h) << '\n';
    }
    for (const auto& t : builder.feed(snapshots)) accumulator.add(t);
    if (observe) observe(batch, snapshots);
    last = batch.frame;
  };
  while (auto batch = reader.next()) {
    for (auto f = last + 1; f < batch->frame; ++f) process(FrameBatch{f, {}});
    process(*batch);
  }
  for (const auto& t : builder.finish()) accumulator.add(t);

  PipelineResult result;
  result.frames = last;
  result.duration_s = config.duration_s.value_or(static_cast<double>(last) / config.measure.fps);
  result.intervals = accumulator.finish(result.duration_s);
  return result;
}

config::RunConfig load_config_file(const fs::path& path) {
  auto in = textio::open_input(path);
  return config::load_run_config(in, path.string());
}

int cmd_track(const TrackArgs& args) {
  const auto config = args.config ? load_config_file(*args.config) : config::RunConfig{};
  ensure_dir(args.out_dir);
  const auto tracks_path = args.out_dir / config.io.tracks_file;
  const auto intervals_path = args.out_dir / config.io.intervals_file;
  auto tracks = textio::open_output(tracks_path);
  auto intervals = textio::open_output(intervals_path);

  PipelineResult result;
  if (args.detections == "-") {
    result = run_pipeline(std::cin, config, tracks, {}, "<stdin>");
  } else {
    auto in = textio::open_input(args.detections);
    result = run_pipeline(in, config, tracks, {}, args.detections);
  }
  finish_output(tracks, tracks_path);
  traffic::write_intervals(intervals, result.intervals);
  finish_output(intervals, intervals_path);
  return 0;
}

int cmd_eval(const EvalArgs& args, std::ostream& stdout_sink) {
  if (!(args.iou > 0.0 && args.iou <= 1.0)) throw ValidationError("--iou must be in (0, 1]");
  const auto catalog = load_catalog(args.classes);
  auto pred_in = textio::open_input(args.pred);
  auto gt_in = textio::open_input(args.gt);
  const auto preds = parse_detections(pred_in, ReaderOptions{std::nullopt, 0.0, false, args.pred.string()});
  const auto gts = parse_detections(gt_in, ReaderOptions{std::nullopt, 0.0, true, args.gt.string()});
  const auto report = metrics::evaluate(preds, gts, catalog, args.iou);
  if (!args.out_dir) {
    metrics::write_report(stdout_sink, report, catalog);
    stdout_sink << '\n';
    metrics::write_confusion(stdout_sink, report, catalog);
    return 0;
  }
  ensure_dir(*args.out_dir);
  const auto report_path = *args.out_dir / "eval.txt";
  const auto confusion_path = *args.out_dir / "confusion.txt";
  auto report_out = textio::open_output(report_path);
  metrics::write_report(report_out, report, catalog);
  finish_output(report_out, report_path);
  auto confusion_out = textio::open_output(confusion_path);
  metrics::write_confusion(confusion_out, report, catalog);
  finish_output(confusion_out, confusion_path);
  return 0;
}

namespace {

struct Series {
  std::vector<double> measured;
  std::vector<double> truth;
};

void write_stats_row(std::ostream& out, const std::string& quantity, const std::string& cls, const Series& s) {
  const auto n = s.measured.size();
  out << quantity << '\t' << cls << '\t' << n;
  if (n < 2) {
    out << "\tNA\tNA\tNA\tNA\tNA\tNA\n";
    return;
  }
  const double rmse = metrics::rmse(s.measured, s.truth);
  std::string r = "NA";
  try {
    r = format_report(metrics::pearson(s.measured, s.truth));
  } catch (const NumericalError&) {
  }
  const auto t = metrics::paired_t_test(s.measured, s.truth);
  out << '\t' << format_report(rmse) << '\t' << r << '\t' << format_report(t.t) << '\t' << format_report(t.p) << '\t'
      << format_report(t.df) << '\t' << format_report(t.mean_difference) << '\n';
}

}  // namespace

void write_stats(std::ostream& out, std::span<const traffic::IntervalRow> measured,
                 std::span<const traffic::IntervalRow> truth) {
  using Key = std::pair<int, int>;  // interval, class
  struct Timing {
    double start;
    double end;
  };
  auto index = [](std::span<const traffic::IntervalRow> rows, const char* what) {
    std::map<int, Timing> timing;
    std::map<Key, const traffic::IntervalRow*> by_key;
    for (const auto& r : rows) {
      const auto [it, fresh] = timing.try_emplace(r.interval, Timing{r.start_s, r.end_s});
      if (!fresh && (it->second.start != r.start_s || it->second.end != r.end_s))
        throw ValidationError(std::string(what) + ": inconsistent timing for interval " + std::to_string(r.interval));
      if (r.class_id == traffic::IntervalRow::kNoClass) continue;
      if (!by_key.emplace(Key{r.interval, r.class_id}, &r).second)
        throw ValidationError(std::string(what) + ": duplicate row for interval " + std::to_string(r.interval) +
                              " class " + std::to_string(r.class_id));
    }
    return std::pair{timing, by_key};
  };
  const auto [m_timing, m_rows] = index(measured, "measured");
  const auto [t_timing, t_rows] = index(truth, "truth");

  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
  bool same = m_timing.size() == t_timing.size();
  for (auto mi = m_timing.begin(), ti = t_timing.begin(); same && mi != m_timing.end(); ++mi, ++ti) {
    same = mi->first == ti->first && close(mi->second.start, ti->second.start) && close(mi->second.end, ti->second.end);
  }
  if (!same) {
    throw ValidationError("interval series length mismatch: measured has " + std::to_string(m_timing.size()) +
                          " intervals, truth has " + std::to_string(t_timing.size()) + " (or their timing differs)");
  }

  std::set<int> classes;
  for (const auto& [k, r] : m_rows) classes.insert(k.second);
  for (const auto& [k, r] : t_rows) classes.insert(k.second);

  auto lookup = [](const std::map<Key, const traffic::IntervalRow*>& rows, Key k) -> const traffic::IntervalRow* {
    const auto it = rows.find(k);
    return it == rows.end() ? nullptr : it->second;
  };

  out << "quantity\tclass\tn\trmse\tpearson_r\tt\tp\tdf\tmean_difference\n";
  Series flow_all;
  Series speed_all;
  std::map<int, std::pair<double, double>> flow_totals;
  for (const auto& [iv, timing] : m_timing) flow_totals[iv] = {0.0, 0.0};

  std::vector<std::pair<int, Series>> flow_by_class;
  std::vector<std::pair<int, Series>> speed_by_class;
  for (int cls : classes) {
    Series flow;
    Series speed;
    for (const auto& [iv, timing] : m_timing) {
      const auto* m = lookup(m_rows, {iv, cls});
      const auto* t = lookup(t_rows, {iv, cls});
      const double mf = m ? m->flow_vph : 0.0;
      const double tf = t ? t->flow_vph : 0.0;
      flow.measured.push_back(mf);
      flow.truth.push_back(tf);
      flow_totals[iv].first += mf;
      flow_totals[iv].second += tf;
      if (m && t && m->mean_speed_kmh && t->mean_speed_kmh) {
        speed.measured.push_back(*m->mean_speed_kmh);
        speed.truth.push_back(*t->mean_speed_kmh);
        speed_all.measured.push_back(*m->mean_speed_kmh);
        speed_all.truth.push_back(*t->mean_speed_kmh);
      }
    }
    flow_by_class.emplace_back(cls, std::move(flow));
    speed_by_class.emplace_back(cls, std::move(speed));
  }
  for (const auto& [iv, totals] : flow_totals) {
    flow_all.measured.push_back(totals.first);
    flow_all.truth.push_back(totals.second);
  }

  for (const auto& [cls, s] : flow_by_class) write_stats_row(out, "flow_vph", std::to_string(cls), s);
  write_stats_row(out, "flow_vph", "all", flow_all);
  for (const auto& [cls, s] : speed_by_class) write_stats_row(out, "speed_kmh", std::to_string(cls), s);
  write_stats_row(out, "speed_kmh", "all", speed_all);
}

int cmd_stats(const StatsArgs& args, std::ostream& stdout_sink) {
  auto m_in = textio::open_input(args.measured);
  auto t_in = textio::open_input(args.truth);
  const auto measured = traffic::read_intervals(m_in, args.measured.string());
  const auto truth = traffic::read_intervals(t_in, args.truth.string());
  if (!args.out_dir) {
    write_stats(stdout_sink, measured, truth);
    return 0;
  }
  ensure_dir(*args.out_dir);
  const auto path = *args.out_dir / "stats.txt";
  auto out = textio::open_output(path);
  write_stats(out, measured, truth);
  finish_output(out, path);
  return 0;
}

int cmd_synth(const SynthArgs& args) {
  auto in = textio::open_input(args.spec);
  auto spec = synth::load_scenario(in, args.spec.string());
  if (args.seed) spec.seed = *args.seed;
  const auto scenario = synth::generate(spec);

  ensure_dir(args.out_dir);
  const auto det_path = args.out_dir / "detections.txt";
  auto det = textio::open_output(det_path);
  write_detections(det, scenario.frames);
  finish_output(det, det_path);

  const auto gt_path = args.out_dir / "ground_truth.txt";
  auto gt = textio::open_output(gt_path);
  traffic::write_intervals(gt, scenario.truth.intervals);
  finish_output(gt, gt_path);

  const auto agents_path = args.out_dir / "agents.txt";
  auto agents = textio::open_output(agents_path);
  synth::write_agents(agents, scenario.truth);
  finish_output(agents, agents_path);

  config::RunConfig run;
  run.calibration = spec.calibration;
  run.loi = {spec.loi.a, spec.loi.b, spec.loi.direction};
  run.measure = {spec.interval_s, spec.fps};
  run.duration_s = spec.duration_s;
  const auto run_path = args.out_dir / "run.ini";
  auto run_out = textio::open_output(run_path);
  config::write_run_config(run_out, run);
  finish_output(run_out, run_path);
  return 0;
}

int cmd_print_config(std::ostream& out) {
  config::write_run_config(out, config::RunConfig{});
  return 0;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixed-traffic tracking, counting and speed measurement"};
  app.name("mixtrack");
  app.require_subcommand(0, 1);
  bool print_config_flag = false;
  app.add_flag("--print-config", print_config_flag, "Print the default run configuration");

  TrackArgs track;
  std::string track_config;
  auto* track_cmd = app.add_subcommand("track", "Track detections and measure flow and speed per interval");
  track_cmd->add_option("--detections", track.detections, "Detection file, or - for standard input")->required();
  track_cmd->add_option("--config", track_config, "Run configuration file");
  track_cmd->add_option("--out-dir", track.out_dir, "Output directory");

  EvalArgs eval;
  std::string eval_classes;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate detections against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "Predicted detections")->required();
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth detections")->required();
  eval_cmd->add_option("--iou", eval.iou, "IoU threshold")->capture_default_str();
  eval_cmd->add_option("--classes", eval_classes, "Class list, one name per line");
  eval_cmd->add_option("--out-dir", eval_out, "Output directory (default: standard output)");

  StatsArgs stats;
  std::string stats_out;
  auto* stats_cmd = app.add_subcommand("stats", "Compare measured intervals against ground truth");
  stats_cmd->add_option("--measured", stats.measured, "Measured intervals file")->required();
  stats_cmd->add_option("--truth", stats.truth, "Ground-truth intervals file")->required();
  stats_cmd->add_option("--out-dir", stats_out, "Output directory (default: standard output)");

  SynthArgs synth_args;
  std::uint64_t seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scenario with ground truth");
  synth_cmd->add_option("--spec", synth_args.spec, "Scenario file")->required();
  auto* seed_opt = synth_cmd->add_option("--seed", seed, "Override the scenario seed");
  synth_cmd->add_option("--out-dir", synth_args.out_dir, "Output directory");

  auto* print_cmd = app.add_subcommand("print-config", "Print the default run configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "mixtrack: error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Validation);
  }

  try {
    if (print_config_flag || *print_cmd) return cmd_print_config(out);
    if (*track_cmd) {
      if (!track_config.empty()) track.config = track_config;
      return cmd_track(track);
    }
    if (*eval_cmd) {
      if (!eval_classes.empty()) eval.classes = eval_classes;
      if (!eval_out.empty()) eval.out_dir = eval_out;
      return cmd_eval(eval, out);
    }
    if (*stats_cmd) {
      if (!stats_out.empty()) stats.out_dir = stats_out;
      return cmd_stats(stats, out);
    }
    if (*synth_cmd) {
      if (*seed_opt) synth_args.seed = seed;
      return cmd_synth(synth_args);
    }
    out << app.help();
    return static_cast<int>(ErrorKind::Validation);
  } catch (const Error& e) {
    err << "mixtrack: error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "mixtrack: error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Validation);
  }
}

}  // namespace mixtrack::cli
