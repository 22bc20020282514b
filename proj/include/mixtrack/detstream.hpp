#pragma once

// Detection stream ingestion.
//
// Text format, one detection per line:
//
//   frame,x,y,w,h,conf,class[,e0,...,e{D-1}]
//
// Lines starting with '#' and blank lines are ignored. The trailing
// appearance columns are optional but, when present, every line must carry
// the same number of them. Frames are 1-based and rows must be grouped in
// non-decreasing frame order so the stream can be consumed online.
//
// Ground-truth files use the same layout without the confidence column
// (frame,x,y,w,h,class); a seven-column file is also accepted and its
// confidence column is ignored.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mixtrack {

/// Axis-aligned pixel box, top-left anchored.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }
  double aspect() const { return w / h; }
  double area() const { return w * h; }

  /// Box from center, aspect ratio (w/h) and height.
  static BBox from_center(double u, double v, double aspect, double height);

  bool operator==(const BBox&) const = default;
};

struct Detection {
  std::int64_t frame = 1;
  int class_id = 0;
  BBox box;
  double confidence = 1.0;
  std::vector<double> appearance;  // empty when the stream has no descriptors

  bool has_appearance() const { return !appearance.empty(); }
  bool operator==(const Detection&) const = default;
};

/// All detections of one frame.
struct FrameBatch {
  std::int64_t frame = 1;
  std::vector<Detection> detections;
};

class ClassCatalog {
public:
  /// The fourteen mixed-traffic classes used by default.
  static ClassCatalog defaults();
  static ClassCatalog from_names(std::vector<std::string> names);
  /// One class name per line; '#' comments and blank lines skipped.
  static ClassCatalog load(std::istream& in, const std::string& source = "<classes>");

  std::size_t count() const { return names_.size(); }
  const std::string& name(int class_id) const;
  bool contains(int class_id) const { return class_id >= 0 && static_cast<std::size_t>(class_id) < names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

private:
  explicit ClassCatalog(std::vector<std::string> names) : names_(std::move(names)) {}
  std::vector<std::string> names_;
};

/// Returns v / |v|. Vectors already unit length within 1e-12 are returned
/// unchanged so that re-ingesting written descriptors is bit-exact.
std::vector<double> normalize_appearance(std::span<const double> v);

struct ReaderOptions {
  std::optional<std::size_t> expected_embedding_dim;
  double min_confidence = 0.0;  // rows below this are dropped
  bool ground_truth = false;    // frame,x,y,w,h,class[,ignored]
  std::string source = "<detections>";
};

/// Pull-based frame reader. Each call to next() yields the next frame that
/// has at least one row; frames without rows are skipped (callers that need
/// dense frames fill the gaps, see parse_detections).
class DetectionReader {
public:
  DetectionReader(std::istream& in, ReaderOptions options = {});

  std::optional<FrameBatch> next();

  /// Descriptor dimension seen so far (0 = none).
  std::size_t embedding_dim() const { return embedding_dim_.value_or(0); }

private:
  std::optional<Detection> read_row();
  Detection parse_row(std::string_view line);

  std::istream& in_;
  ReaderOptions options_;
  std::size_t line_no_ = 0;
  std::optional<std::size_t> embedding_dim_;
  std::optional<Detection> pending_;
  std::int64_t last_frame_ = 0;
};

/// Reads a whole stream into dense batches for frames 1..last, with empty
/// batches for frames that had no rows.
std::vector<FrameBatch> parse_detections(std::istream& in, ReaderOptions options = {});

/// One line of the detection format (no trailing newline). Reals are
/// written in shortest round-trip form.
std::string format_detection(const Detection& d);
void write_detections(std::ostream& out, std::span<const FrameBatch> batches);

}  // namespace mixtrack
