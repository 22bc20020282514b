#include "mixtrack/detstream.hpp"

#include <cmath>
#include <set>

#include "mixtrack/error.hpp"
#include "mixtrack/textio.hpp"

namespace mixtrack {

BBox BBox::from_center(double u, double v, double aspect, double height) {
  const double w = aspect * height;
  return BBox{u - 0.5 * w, v - 0.5 * height, w, height};
}

ClassCatalog ClassCatalog::defaults() {
  return ClassCatalog({"Ambulance", "Auto Rickshaw", "Bicycle", "Bus", "Human Hauler", "Microbus",
                       "Minibus", "Motor Cycle", "Pedestrian", "Pickup", "Private Passenger Car",
                       "Rickshaw", "Special Purpose Vehicle", "Truck"});
}

ClassCatalog ClassCatalog::from_names(std::vector<std::string> names) {
  if (names.empty()) throw ValidationError("class catalog is empty");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw ValidationError("class catalog contains an empty name");
    if (!seen.insert(n).second) throw ValidationError("duplicate class name '" + n + "'");
  }
  return ClassCatalog(std::move(names));
}

ClassCatalog ClassCatalog::load(std::istream& in, const std::string& source) {
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = textio::trim(line);
    if (t.empty() || t.front() == '#') continue;
    names.emplace_back(t);
  }
  if (names.empty()) throw ValidationError(source + ": no class names");
  return from_names(std::move(names));
}

const std::string& ClassCatalog::name(int class_id) const {
  if (!contains(class_id)) throw ValidationError("class id " + std::to_string(class_id) + " outside catalog");
  return names_[static_cast<std::size_t>(class_id)];
}

std::vector<double> normalize_appearance(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) throw ValidationError("appearance descriptor has zero or non-finite norm");
  std::vector<double> out(v.begin(), v.end());
  if (std::abs(sq - 1.0) <= 1e-12) return out;
  const double norm = std::sqrt(sq);
  for (double& x : out) x /= norm;
  return out;
}

DetectionReader::DetectionReader(std::istream& in, ReaderOptions options)
    : in_(in), options_(std::move(options)), embedding_dim_(options_.expected_embedding_dim) {}

Detection DetectionReader::parse_row(std::string_view line) {
  const auto fields = textio::split(line, ',');
  const auto fail = [&](const std::string& msg) -> ParseError { return ParseError(options_.source, line_no_, msg); };

  std::size_t base = 7;
  if (options_.ground_truth) {
    if (fields.size() != 6 && fields.size() != 7) {
      throw fail("expected 6 columns (frame,x,y,w,h,class), got " + std::to_string(fields.size()));
    }
    base = fields.size();
  } else if (fields.size() < 7) {
    throw fail("expected at least 7 columns (frame,x,y,w,h,conf,class), got " + std::to_string(fields.size()));
  }

  Detection d;
  std::int64_t frame = 0;
  if (!textio::parse_int(fields[0], frame)) throw fail("frame is not an integer");
  if (frame < 1) throw fail("frame index must be >= 1");
  d.frame = frame;

  double vals[4];
  for (int i = 0; i < 4; ++i) {
    if (!textio::parse_real(fields[1 + i], vals[i])) throw fail("bounding box column " + std::to_string(i + 2) + " is not a finite number");
  }
  d.box = BBox{vals[0], vals[1], vals[2], vals[3]};
  if (!(d.box.w > 0.0) || !(d.box.h > 0.0)) throw fail("bounding box width and height must be positive");

  std::string_view class_field;
  if (options_.ground_truth) {
    class_field = fields[base - 1];
    d.confidence = 1.0;
  } else {
    if (!textio::parse_real(fields[5], d.confidence)) throw fail("confidence is not a finite number");
    if (d.confidence < 0.0 || d.confidence > 1.0) throw fail("confidence outside [0,1]");
    class_field = fields[6];
  }
  std::int64_t cls = 0;
  if (!textio::parse_int(class_field, cls) || cls < 0 || cls > 1'000'000) throw fail("class is not a non-negative integer");
  d.class_id = static_cast<int>(cls);

  const std::size_t dim = fields.size() - base;
  if (!options_.ground_truth) {
    if (!embedding_dim_) {
      embedding_dim_ = dim;
    } else if (*embedding_dim_ != dim) {
      throw fail("embedding has " + std::to_string(dim) + " columns, expected " + std::to_string(*embedding_dim_));
    }
  }
  if (dim > 0 && !options_.ground_truth) {
    std::vector<double> e(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!textio::parse_real(fields[base + i], e[i])) throw fail("embedding column " + std::to_string(i) + " is not a finite number");
    }
    try {
      d.appearance = normalize_appearance(e);
    } catch (const ValidationError& err) {
      throw fail(err.what());
    }
  }
  return d;
}

std::optional<Detection> DetectionReader::read_row() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    const auto t = textio::trim(line);
    if (t.empty() || t.front() == '#') continue;
    Detection d = parse_row(t);
    if (d.frame < last_frame_) {
      throw ParseError(options_.source, line_no_,
                       "frame " + std::to_string(d.frame) + " after frame " + std::to_string(last_frame_) +
                           " (rows must be in non-decreasing frame order)");
    }
    last_frame_ = d.frame;
    if (d.confidence < options_.min_confidence) continue;
    return d;
  }
  if (in_.bad()) throw IoError(options_.source + ": read failure");
  return std::nullopt;
}

std::optional<FrameBatch> DetectionReader::next() {
  if (!pending_) pending_ = read_row();
  if (!pending_) return std::nullopt;
  FrameBatch batch;
  batch.frame = pending_->frame;
  batch.detections.push_back(std::move(*pending_));
  pending_.reset();
  while (auto d = read_row()) {
    if (d->frame != batch.frame) {
      pending_ = std::move(d);
      break;
    }
    batch.detections.push_back(std::move(*d));
  }
  return batch;
}

std::vector<FrameBatch> parse_detections(std::istream& in, ReaderOptions options) {
  DetectionReader reader(in, std::move(options));
  std::vector<FrameBatch> out;
  while (auto batch = reader.next()) {
    for (std::int64_t f = static_cast<std::int64_t>(out.size()) + 1; f < batch->frame; ++f) {
      out.push_back(FrameBatch{f, {}});
    }
    out.push_back(std::move(*batch));
  }
  return out;
}

std::string format_detection(const Detection& d) {
  std::string s;
  s.reserve(64 + 24 * d.appearance.size());
  s += std::to_string(d.frame);
  for (double v : {d.box.x, d.box.y, d.box.w, d.box.h, d.confidence}) {
    s += ',';
    s += textio::format_exact(v);
  }
  s += ',';
  s += std::to_string(d.class_id);
  for (double v : d.appearance) {
    s += ',';
    s += textio::format_exact(v);
  }
  return s;
}

void write_detections(std::ostream& out, std::span<const FrameBatch> batches) {
  for (const auto& b : batches) {
    for (const auto& d : b.detections) out << format_detection(d) << '\n';
  }
}

}  // namespace mixtrack
