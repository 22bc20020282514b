#pragma once

// Track-to-detection association: motion and appearance distances, the
// admissibility gate, the combined cost matrix and a rectangular
// minimum-cost assignment solver.

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mixtrack/detstream.hpp"
#include "mixtrack/motion.hpp"

namespace mixtrack::assoc {

/// 0.95 quantile of chi-square with 4 degrees of freedom.
inline constexpr double kChi2Gate4 = 9.4877;

/// Bounded FIFO of unit-norm appearance descriptors.
class AppearanceGallery {
public:
  static constexpr std::size_t kDefaultCapacity = 100;

  explicit AppearanceGallery(std::size_t capacity = kDefaultCapacity);

  /// Appends a descriptor, evicting the oldest when full. The first push
  /// fixes the dimension.
  void push(std::span<const double> descriptor);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return size_ == 0; }

  /// i-th descriptor, oldest first.
  std::span<const double> at(std::size_t i) const;

private:
  std::size_t capacity_;
  std::size_t dim_ = 0;
  std::size_t head_ = 0;  // slot of the oldest entry
  std::size_t size_ = 0;
  std::vector<double> data_;
};

/// (d - y)^T S^-1 (d - y) via Cholesky.
double mahalanobis_sq(const motion::MeasurementProjection& proj, const motion::Vector4& d);

/// min over the gallery of 1 - r . r_k. Throws ContractError on an empty gallery.
double cosine_gallery_distance(const AppearanceGallery& gallery, std::span<const double> r);

/// Both distances within their (inclusive) thresholds.
constexpr bool gate(double d1, double d2, double t1, double t2) { return d1 <= t1 && d2 <= t2; }

double iou(const BBox& a, const BBox& b);

struct CostMatrix {
  static constexpr double kSentinel = 1e5;

  Eigen::MatrixXd values;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> admissible;

  CostMatrix() = default;
  CostMatrix(Eigen::Index rows, Eigen::Index cols);
  /// Every entry admissible.
  static CostMatrix dense(const Eigen::MatrixXd& values);

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  void forbid(Eigen::Index i, Eigen::Index j);
  void set(Eigen::Index i, Eigen::Index j, double cost);
};

struct AssociationParams {
  double lambda = 0.0;  // weight of the motion term in the cost
  double motion_gate = kChi2Gate4;
  double appearance_gate = 0.2;
};

/// What the cost builder needs to know about one track.
struct TrackCandidate {
  /// Absent when the projection was numerically singular.
  std::optional<motion::MeasurementProjection> projection;
  const AppearanceGallery* gallery = nullptr;
};

/// Motion-gated, appearance-weighted cost. Pairs without an appearance
/// term on both sides fall back to the motion distance alone (lambda = 1).
CostMatrix build_cost_matrix(std::span<const TrackCandidate> tracks, std::span<const Detection> detections,
                             const AssociationParams& params);

/// 1 - IoU, admissible when at most max_distance.
CostMatrix build_iou_cost_matrix(std::span<const BBox> tracks, std::span<const Detection> detections,
                                 double max_distance);

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (row, col), sorted by row
  std::vector<std::size_t> unmatched_rows;
  std::vector<std::size_t> unmatched_cols;
};

/// Among assignments with the largest number of admissible pairs, returns
/// one of minimum total cost. Inadmissible pairs are never returned.
Assignment solve_assignment(const CostMatrix& cost);

}  // namespace mixtrack::assoc
