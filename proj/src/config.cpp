#include "mixtrack/config.hpp"

#include <set>

#include "mixtrack/error.hpp"
#include "mixtrack/ini.hpp"
#include "mixtrack/textio.hpp"

namespace mixtrack::config {

namespace {

const std::set<std::string> kSections = {"calibration", "loi", "tracking", "measure", "io"};

int checked_int(std::int64_t v, const std::string& what) {
  if (v < -1'000'000'000 || v > 1'000'000'000) throw ValidationError(what + " out of range");
  return static_cast<int>(v);
}

}  // namespace

void RunConfig::validate() const {
  if (reference) {
    const auto& r = *reference;
    if (!(r.true_x_m > 0 && r.true_y_m > 0 && r.apparent_x_px > 0 && r.apparent_y_px > 0))
      throw ValidationError("reference object lengths must be positive");
  }
  effective_calibration().validate();
  if (loi.direction < -1 || loi.direction > 1) throw ValidationError("loi direction must be -1, 0 or 1");
  if (loi.a_px == loi.b_px) throw ValidationError("loi endpoints coincide");
  const auto& t = tracking;
  if (!(t.association.lambda >= 0.0 && t.association.lambda <= 1.0)) throw ValidationError("lambda must be in [0, 1]");
  if (!(t.association.motion_gate > 0.0)) throw ValidationError("t1 must be positive");
  if (!(t.association.appearance_gate > 0.0 && t.association.appearance_gate <= 2.0))
    throw ValidationError("t2 must be in (0, 2]");
  if (t.max_age < 0) throw ValidationError("max_age must be non-negative");
  if (t.n_init < 1) throw ValidationError("n_init must be at least 1");
  if (t.gallery_capacity < 1) throw ValidationError("gallery_capacity must be at least 1");
  if (!(t.iou_max_distance > 0.0 && t.iou_max_distance <= 1.0)) throw ValidationError("iou_max_distance must be in (0, 1]");
  if (!(confidence_floor >= 0.0 && confidence_floor <= 1.0)) throw ValidationError("confidence_floor must be in [0, 1]");
  measure.validate();
  if (duration_s && !(*duration_s >= 0.0)) throw ValidationError("duration_s must be non-negative");
}

calib::CalibrationParams RunConfig::effective_calibration() const {
  auto p = calibration;
  if (reference) {
    const auto m = calib::derive_magnification(*reference);
    p.phi = m.phi;
    p.omega = m.omega;
  }
  return p;
}

traffic::LineOfInterest RunConfig::line_of_interest() const {
  return traffic::LineOfInterest::from_image(loi.a_px, loi.b_px, loi.direction, effective_calibration());
}

RunConfig load_run_config(std::istream& in, const std::string& source) {
  const auto doc = ini::Document::parse(in, source);
  for (const auto& s : doc.sections()) {
    if (!kSections.count(s)) throw ValidationError(source + ": unknown section [" + s + "]");
  }
  doc.check_keys("calibration", {"phi", "omega", "delta_deg", "x0", "y0", "ref_true_x_m", "ref_true_y_m",
                                 "ref_apparent_x_px", "ref_apparent_y_px"});
  doc.check_keys("loi", {"x1", "y1", "x2", "y2", "direction"});
  doc.check_keys("tracking", {"lambda", "t1", "t2", "max_age", "n_init", "gallery_capacity", "confidence_floor",
                              "iou_max_distance"});
  doc.check_keys("measure", {"interval_s", "fps", "duration_s"});
  doc.check_keys("io", {"tracks_file", "intervals_file", "classes_file"});

  RunConfig c;
  auto& cal = c.calibration;
  cal.phi = doc.real("calibration", "phi", cal.phi);
  cal.omega = doc.real("calibration", "omega", cal.omega);
  cal.delta_deg = doc.real("calibration", "delta_deg", cal.delta_deg);
  cal.x0 = doc.real("calibration", "x0", cal.x0);
  cal.y0 = doc.real("calibration", "y0", cal.y0);

  const std::vector<std::string> ref_keys = {"ref_true_x_m", "ref_true_y_m", "ref_apparent_x_px", "ref_apparent_y_px"};
  std::size_t ref_count = 0;
  for (const auto& k : ref_keys) ref_count += doc.has("calibration", k) ? 1 : 0;
  if (ref_count != 0) {
    if (ref_count != ref_keys.size()) throw ValidationError(source + ": reference object needs all four ref_* keys");
    if (doc.has("calibration", "phi") || doc.has("calibration", "omega"))
      throw ValidationError(source + ": give either phi/omega or a reference object, not both");
    c.reference = calib::ReferenceObject{doc.real("calibration", "ref_true_x_m", 0), doc.real("calibration", "ref_true_y_m", 0),
                                         doc.real("calibration", "ref_apparent_x_px", 0),
                                         doc.real("calibration", "ref_apparent_y_px", 0)};
  }

  c.loi.a_px = {doc.real("loi", "x1", c.loi.a_px.x), doc.real("loi", "y1", c.loi.a_px.y)};
  c.loi.b_px = {doc.real("loi", "x2", c.loi.b_px.x), doc.real("loi", "y2", c.loi.b_px.y)};
  c.loi.direction = checked_int(doc.integer("loi", "direction", c.loi.direction), "direction");

  auto& t = c.tracking;
  t.association.lambda = doc.real("tracking", "lambda", t.association.lambda);
  t.association.motion_gate = doc.real("tracking", "t1", t.association.motion_gate);
  t.association.appearance_gate = doc.real("tracking", "t2", t.association.appearance_gate);
  t.max_age = checked_int(doc.integer("tracking", "max_age", t.max_age), "max_age");
  t.n_init = checked_int(doc.integer("tracking", "n_init", t.n_init), "n_init");
  const auto gallery = doc.integer("tracking", "gallery_capacity", static_cast<std::int64_t>(t.gallery_capacity));
  if (gallery < 1 || gallery > 1'000'000) throw ValidationError(source + ": gallery_capacity out of range");
  t.gallery_capacity = static_cast<std::size_t>(gallery);
  t.iou_max_distance = doc.real("tracking", "iou_max_distance", t.iou_max_distance);
  c.confidence_floor = doc.real("tracking", "confidence_floor", c.confidence_floor);

  c.measure.interval_s = doc.real("measure", "interval_s", c.measure.interval_s);
  c.measure.fps = doc.real("measure", "fps", c.measure.fps);
  if (doc.has("measure", "duration_s")) c.duration_s = doc.real("measure", "duration_s", 0.0);

  c.io.tracks_file = doc.text("io", "tracks_file", c.io.tracks_file);
  c.io.intervals_file = doc.text("io", "intervals_file", c.io.intervals_file);
  c.io.classes_file = doc.text("io", "classes_file", c.io.classes_file);

  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return c;
}

void write_run_config(std::ostream& out, const RunConfig& c) {
  using textio::format_exact;
  out << "[calibration]\n";
  if (c.reference) {
    out << "ref_true_x_m = " << format_exact(c.reference->true_x_m) << '\n'
        << "ref_true_y_m = " << format_exact(c.reference->true_y_m) << '\n'
        << "ref_apparent_x_px = " << format_exact(c.reference->apparent_x_px) << '\n'
        << "ref_apparent_y_px = " << format_exact(c.reference->apparent_y_px) << '\n';
  } else {
    out << "phi = " << format_exact(c.calibration.phi) << '\n'
        << "omega = " << format_exact(c.calibration.omega) << '\n';
  }
  out << "delta_deg = " << format_exact(c.calibration.delta_deg) << '\n'
      << "x0 = " << format_exact(c.calibration.x0) << '\n'
      << "y0 = " << format_exact(c.calibration.y0) << "\n\n";

  out << "[loi]\n"
      << "x1 = " << format_exact(c.loi.a_px.x) << '\n'
      << "y1 = " << format_exact(c.loi.a_px.y) << '\n'
      << "x2 = " << format_exact(c.loi.b_px.x) << '\n'
      << "y2 = " << format_exact(c.loi.b_px.y) << '\n'
      << "direction = " << c.loi.direction << "\n\n";

  const auto& t = c.tracking;
  out << "[tracking]\n"
      << "lambda = " << format_exact(t.association.lambda) << '\n'
      << "t1 = " << format_exact(t.association.motion_gate) << '\n'
      << "t2 = " << format_exact(t.association.appearance_gate) << '\n'
      << "max_age = " << t.max_age << '\n'
      << "n_init = " << t.n_init << '\n'
      << "gallery_capacity = " << t.gallery_capacity << '\n'
      << "confidence_floor = " << format_exact(c.confidence_floor) << '\n'
      << "iou_max_distance = " << format_exact(t.iou_max_distance) << "\n\n";

  out << "[measure]\n"
      << "interval_s = " << format_exact(c.measure.interval_s) << '\n'
      << "fps = " << format_exact(c.measure.fps) << '\n';
  if (c.duration_s) out << "duration_s = " << format_exact(*c.duration_s) << '\n';
  else out << "; duration_s = <last frame / fps>\n";
  out << '\n';

  out << "[io]\n"
      << "tracks_file = " << c.io.tracks_file << '\n'
      << "intervals_file = " << c.io.intervals_file << '\n';
  if (c.io.classes_file.empty()) out << "; classes_file = <built-in list>\n";
  else out << "classes_file = " << c.io.classes_file << '\n';
}

}  // namespace mixtrack::config
