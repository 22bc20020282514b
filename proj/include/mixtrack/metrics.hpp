#pragma once

// Detection evaluation (precision, recall, F1, AP, mAP, confusion matrix) and
// agreement statistics between measured and reference series.

#include <Eigen/Dense>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "mixtrack/detstream.hpp"

namespace mixtrack::metrics {

struct DetectionLabel {
  bool true_positive = false;
  std::optional<std::size_t> ground_truth;  // index of the matched ground truth
};

struct MatchLabeling {
  std::vector<DetectionLabel> detections;  // parallel to the input detections
  std::vector<bool> ground_truth_matched;

  std::size_t tp() const;
  std::size_t fp() const;
  std::size_t fn() const;
};

/// Greedy one-to-one matching for one frame. Detections are visited by
/// descending confidence (stable on ties); each takes the unmatched ground
/// truth of highest IoU that is at least the threshold. With class_aware
/// the ground truth must share the detection's class.
MatchLabeling match_to_ground_truth(std::span<const Detection> detections, std::span<const Detection> ground_truths,
                                    double iou_threshold, bool class_aware = true);

// Zero denominators give 0.
double precision(std::size_t tp, std::size_t fp);
double recall(std::size_t tp, std::size_t fn);
double f1(double p, double r);

struct ScoredDetection {
  double confidence = 0.0;
  bool true_positive = false;
};

struct PrPoint {
  double confidence;  // threshold: detections with confidence >= this
  double precision;
  double recall;
};

/// One point per distinct confidence, in descending confidence order.
std::vector<PrPoint> pr_curve(std::span<const ScoredDetection> detections, std::size_t n_ground_truth);

/// Area under the monotone precision envelope,
/// sum over recall steps of (R_m - R_{m-1}) * max_{R >= R_m} P.
double average_precision(std::span<const ScoredDetection> detections, std::size_t n_ground_truth);

double mean_ap(std::span<const double> aps);

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  Eigen::MatrixXd counts;

  /// Each non-empty row divided by its total.
  Eigen::MatrixXd row_normalized() const;
};

struct ClassEval {
  int class_id = 0;
  std::size_t n_ground_truth = 0;
  std::size_t n_detections = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> ap;  // absent without ground truth
  std::vector<PrPoint> curve;
};

struct EvalReport {
  std::vector<ClassEval> classes;  // one per catalog class
  std::optional<double> map;       // absent when no class has ground truth
  ConfusionMatrix confusion;
  double iou_threshold = 0.5;
};

/// Frame batches need not be dense; frames are paired by index.
EvalReport evaluate(std::span<const FrameBatch> predictions, std::span<const FrameBatch> ground_truth,
                    const ClassCatalog& catalog, double iou_threshold = 0.5);

/// Per-class rows then an "all" summary row, tab-delimited.
void write_report(std::ostream& out, const EvalReport& report, const ClassCatalog& catalog);
/// Row-normalized confusion matrix with class-name headers.
void write_confusion(std::ostream& out, const EvalReport& report, const ClassCatalog& catalog);

double rmse(std::span<const double> a, std::span<const double> b);

/// Throws NumericalError when either series has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  double mean_difference = 0.0;
};

/// Paired two-tailed t-test on a - b with n - 1 degrees of freedom. When
/// every difference is equal and non-zero, t is +-infinity and p is 0.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace mixtrack::metrics
