#include "mixtrack/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mixtrack/assoc.hpp"
#include "mixtrack/error.hpp"
#include "mixtrack/textio.hpp"

namespace mixtrack::metrics {

std::size_t MatchLabeling::tp() const {
  return static_cast<std::size_t>(
      std::count_if(detections.begin(), detections.end(), [](const DetectionLabel& d) { return d.true_positive; }));
}

std::size_t MatchLabeling::fp() const { return detections.size() - tp(); }

std::size_t MatchLabeling::fn() const {
  return static_cast<std::size_t>(std::count(ground_truth_matched.begin(), ground_truth_matched.end(), false));
}

namespace {

std::vector<std::size_t> by_confidence(std::span<const Detection> detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detections[a].confidence > detections[b].confidence; });
  return order;
}

}  // namespace

MatchLabeling match_to_ground_truth(std::span<const Detection> detections, std::span<const Detection> ground_truths,
                                    double iou_threshold, bool class_aware) {
  MatchLabeling out;
  out.detections.resize(detections.size());
  out.ground_truth_matched.assign(ground_truths.size(), false);
  for (std::size_t di : by_confidence(detections)) {
    const auto& d = detections[di];
    double best = -1.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      if (out.ground_truth_matched[g]) continue;
      if (class_aware && ground_truths[g].class_id != d.class_id) continue;
      const double o = assoc::iou(d.box, ground_truths[g].box);
      if (o >= iou_threshold && o > best) {
        best = o;
        best_gt = g;
      }
    }
    if (best_gt) {
      out.detections[di] = {true, best_gt};
      out.ground_truth_matched[*best_gt] = true;
    }
  }
  return out;
}

double precision(std::size_t tp, std::size_t fp) {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall(std::size_t tp, std::size_t fn) {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

std::vector<PrPoint> pr_curve(std::span<const ScoredDetection> detections, std::size_t n_ground_truth) {
  std::vector<ScoredDetection> sorted(detections.begin(), detections.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredDetection& a, const ScoredDetection& b) { return a.confidence > b.confidence; });
  std::vector<PrPoint> curve;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].true_positive) ++tp;
    const bool group_end = i + 1 == sorted.size() || sorted[i + 1].confidence != sorted[i].confidence;
    if (!group_end) continue;
    curve.push_back({sorted[i].confidence, static_cast<double>(tp) / static_cast<double>(i + 1),
                     n_ground_truth == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_ground_truth)});
  }
  return curve;
}

double average_precision(std::span<const ScoredDetection> detections, std::size_t n_ground_truth) {
  if (n_ground_truth == 0) throw ContractError("average precision needs at least one ground truth");
  std::vector<ScoredDetection> sorted(detections.begin(), detections.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredDetection& a, const ScoredDetection& b) { return a.confidence > b.confidence; });
  // (true positives, rank) at each distinct-confidence boundary. Working from
  // the integer counts in extended precision rounds the result only once.
  std::vector<std::pair<std::size_t, std::size_t>> points;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].true_positive) ++tp;
    if (i + 1 == sorted.size() || sorted[i + 1].confidence != sorted[i].confidence) points.emplace_back(tp, i + 1);
  }
  std::vector<long double> envelope(points.size());
  long double running = 0.0L;
  for (std::size_t k = points.size(); k-- > 0;) {
    running = std::max(running, static_cast<long double>(points[k].first) / static_cast<long double>(points[k].second));
    envelope[k] = running;
  }
  long double area = 0.0L;
  std::size_t prev_tp = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    area += static_cast<long double>(points[k].first - prev_tp) * envelope[k];
    prev_tp = points[k].first;
  }
  const double ap = static_cast<double>(area / static_cast<long double>(n_ground_truth));
  return std::clamp(ap, 0.0, 1.0);
}

double mean_ap(std::span<const double> aps) {
  if (aps.empty()) throw ContractError("mean AP over zero classes");
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

Eigen::MatrixXd ConfusionMatrix::row_normalized() const {
  Eigen::MatrixXd out = counts;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double total = out.row(r).sum();
    if (total > 0.0) out.row(r) /= total;
  }
  return out;
}

EvalReport evaluate(std::span<const FrameBatch> predictions, std::span<const FrameBatch> ground_truth,
                    const ClassCatalog& catalog, double iou_threshold) {
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0) throw ValidationError("IoU threshold must lie in (0,1]");
  const auto n_classes = static_cast<Eigen::Index>(catalog.count());

  std::map<std::int64_t, std::pair<std::vector<Detection>, std::vector<Detection>>> frames;
  for (const auto& b : predictions) {
    for (const auto& d : b.detections) {
      if (!catalog.contains(d.class_id)) throw ValidationError("prediction class " + std::to_string(d.class_id) + " outside the class list");
      frames[b.frame].first.push_back(d);
    }
  }
  for (const auto& b : ground_truth) {
    for (const auto& d : b.detections) {
      if (!catalog.contains(d.class_id)) throw ValidationError("ground-truth class " + std::to_string(d.class_id) + " outside the class list");
      frames[b.frame].second.push_back(d);
    }
  }

  EvalReport report;
  report.iou_threshold = iou_threshold;
  report.confusion.counts = Eigen::MatrixXd::Zero(n_classes, n_classes);
  std::vector<std::vector<ScoredDetection>> scored(catalog.count());
  report.classes.resize(catalog.count());
  for (std::size_t c = 0; c < catalog.count(); ++c) report.classes[c].class_id = static_cast<int>(c);

  for (const auto& [frame, pair] : frames) {
    const auto& [dets, gts] = pair;
    const auto labels = match_to_ground_truth(dets, gts, iou_threshold, true);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      auto& ce = report.classes[static_cast<std::size_t>(dets[i].class_id)];
      ++ce.n_detections;
      if (labels.detections[i].true_positive) ++ce.tp;
      scored[static_cast<std::size_t>(dets[i].class_id)].push_back({dets[i].confidence, labels.detections[i].true_positive});
    }
    for (const auto& g : gts) ++report.classes[static_cast<std::size_t>(g.class_id)].n_ground_truth;

    const auto agnostic = match_to_ground_truth(dets, gts, iou_threshold, false);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (const auto g = agnostic.detections[i].ground_truth) report.confusion.counts(gts[*g].class_id, dets[i].class_id) += 1.0;
    }
  }

  std::vector<double> aps;
  for (auto& ce : report.classes) {
    ce.fp = ce.n_detections - ce.tp;
    ce.fn = ce.n_ground_truth - ce.tp;
    ce.precision = precision(ce.tp, ce.fp);
    ce.recall = recall(ce.tp, ce.fn);
    ce.f1 = f1(ce.precision, ce.recall);
    ce.curve = pr_curve(scored[static_cast<std::size_t>(ce.class_id)], ce.n_ground_truth);
    if (ce.n_ground_truth > 0) {
      ce.ap = average_precision(scored[static_cast<std::size_t>(ce.class_id)], ce.n_ground_truth);
      aps.push_back(*ce.ap);
    }
  }
  if (!aps.empty()) report.map = mean_ap(aps);
  return report;
}

void write_report(std::ostream& out, const EvalReport& report, const ClassCatalog& catalog) {
  using textio::format_report;
  out << "class\tname\tn_gt\tn_det\ttp\tfp\tfn\tprecision\trecall\tf1\tap\n";
  std::size_t tp = 0, fp = 0, fn = 0, n_gt = 0, n_det = 0;
  for (const auto& c : report.classes) {
    out << c.class_id << '\t' << catalog.name(c.class_id) << '\t' << c.n_ground_truth << '\t' << c.n_detections << '\t'
        << c.tp << '\t' << c.fp << '\t' << c.fn << '\t' << format_report(c.precision) << '\t'
        << format_report(c.recall) << '\t' << format_report(c.f1) << '\t' << (c.ap ? format_report(*c.ap) : "NA")
        << '\n';
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    n_gt += c.n_ground_truth;
    n_det += c.n_detections;
  }
  const double p = precision(tp, fp);
  const double r = recall(tp, fn);
  out << "all\tmAP@" << format_report(report.iou_threshold) << '\t' << n_gt << '\t' << n_det << '\t' << tp << '\t'
      << fp << '\t' << fn << '\t' << format_report(p) << '\t' << format_report(r) << '\t' << format_report(f1(p, r))
      << '\t' << (report.map ? format_report(*report.map) : "NA") << '\n';
}

void write_confusion(std::ostream& out, const EvalReport& report, const ClassCatalog& catalog) {
  const Eigen::MatrixXd m = report.confusion.row_normalized();
  out << "true\\predicted";
  for (const auto& n : catalog.names()) out << '\t' << n;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << catalog.name(static_cast<int>(r));
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << '\t' << textio::format_report(m(r, c));
    out << '\n';
  }
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("series lengths differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  if (a.size() < 2) throw ValidationError("series need at least two values");
}

double mean(std::span<const double> a) { return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size()); }

}  // namespace

double rmse(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw NumericalError("correlation undefined for a constant series");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double md = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - md) * (x - md);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.df = static_cast<double>(n - 1);
  r.mean_difference = md;
  if (sd == 0.0) {
    if (md == 0.0) return r;
    r.t = md > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = md / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

}  // namespace mixtrack::metrics
