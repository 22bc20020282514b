#include "mixtrack/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixtrack/error.hpp"

namespace mixtrack::assoc {

AppearanceGallery::AppearanceGallery(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ValidationError("gallery capacity must be positive");
}

void AppearanceGallery::push(std::span<const double> descriptor) {
  if (descriptor.empty()) throw ContractError("cannot add an empty descriptor to a gallery");
  if (dim_ == 0) {
    dim_ = descriptor.size();
    data_.assign(capacity_ * dim_, 0.0);
  } else if (descriptor.size() != dim_) {
    throw ValidationError("descriptor dimension " + std::to_string(descriptor.size()) + " does not match gallery dimension " +
                          std::to_string(dim_));
  }
  std::size_t slot;
  if (size_ < capacity_) {
    slot = (head_ + size_) % capacity_;
    ++size_;
  } else {
    slot = head_;
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(descriptor.begin(), descriptor.end(), data_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
}

std::span<const double> AppearanceGallery::at(std::size_t i) const {
  const std::size_t slot = (head_ + i) % capacity_;
  return {data_.data() + slot * dim_, dim_};
}

double mahalanobis_sq(const motion::MeasurementProjection& proj, const motion::Vector4& d) {
  Eigen::LLT<motion::Matrix4> llt(proj.covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("projection covariance is not positive definite");
  const motion::Vector4 z = llt.matrixL().solve(d - proj.mean);
  return z.squaredNorm();
}

double cosine_gallery_distance(const AppearanceGallery& gallery, std::span<const double> r) {
  if (gallery.empty()) throw ContractError("cosine distance against an empty gallery");
  if (r.size() != gallery.dim()) throw ValidationError("descriptor dimension does not match gallery");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < gallery.size(); ++k) {
    const auto g = gallery.at(k);
    double dot = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) dot += g[i] * r[i];
    best = std::min(best, 1.0 - dot);
  }
  return std::clamp(best, 0.0, 2.0);
}

double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

CostMatrix::CostMatrix(Eigen::Index rows, Eigen::Index cols)
    : values(Eigen::MatrixXd::Constant(rows, cols, kSentinel)),
      admissible(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false)) {}

CostMatrix CostMatrix::dense(const Eigen::MatrixXd& values) {
  CostMatrix c(values.rows(), values.cols());
  c.values = values;
  c.admissible.setConstant(true);
  return c;
}

void CostMatrix::forbid(Eigen::Index i, Eigen::Index j) {
  values(i, j) = kSentinel;
  admissible(i, j) = false;
}

void CostMatrix::set(Eigen::Index i, Eigen::Index j, double cost) {
  values(i, j) = cost;
  admissible(i, j) = true;
}

CostMatrix build_cost_matrix(std::span<const TrackCandidate> tracks, std::span<const Detection> detections,
                             const AssociationParams& params) {
  const auto n = static_cast<Eigen::Index>(tracks.size());
  const auto m = static_cast<Eigen::Index>(detections.size());
  CostMatrix cost(n, m);

  std::vector<motion::Vector4> measurements;
  measurements.reserve(detections.size());
  for (const auto& d : detections) measurements.push_back(motion::to_measurement(d.box));

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = tracks[static_cast<std::size_t>(i)];
    if (!t.projection) continue;
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& det = detections[static_cast<std::size_t>(j)];
      double d1;
      try {
        d1 = mahalanobis_sq(*t.projection, measurements[static_cast<std::size_t>(j)]);
      } catch (const NumericalError&) {
        continue;
      }
      if (d1 > params.motion_gate) continue;

      const bool with_appearance = t.gallery != nullptr && !t.gallery->empty() && det.has_appearance() &&
                                   det.appearance.size() == t.gallery->dim();
      if (!with_appearance) {
        cost.set(i, j, d1);
        continue;
      }
      const double d2 = cosine_gallery_distance(*t.gallery, det.appearance);
      if (!gate(d1, d2, params.motion_gate, params.appearance_gate)) continue;
      cost.set(i, j, params.lambda * d1 + (1.0 - params.lambda) * d2);
    }
  }
  return cost;
}

CostMatrix build_iou_cost_matrix(std::span<const BBox> tracks, std::span<const Detection> detections,
                                 double max_distance) {
  CostMatrix cost(static_cast<Eigen::Index>(tracks.size()), static_cast<Eigen::Index>(detections.size()));
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double d = 1.0 - iou(tracks[i], detections[j].box);
      if (d <= max_distance) cost.set(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), d);
    }
  }
  return cost;
}

namespace {

// Shortest augmenting path with row/column potentials on an n x m matrix,
// n <= m. Returns the column assigned to each row.
std::vector<Eigen::Index> hungarian(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual column 0 holding the row being inserted.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<Eigen::Index> p(static_cast<std::size_t>(m + 1), 0);
  std::vector<Eigen::Index> way(static_cast<std::size_t>(m + 1), 0);
  std::vector<double> minv(static_cast<std::size_t>(m + 1));
  std::vector<char> used(static_cast<std::size_t>(m + 1));

  for (Eigen::Index i = 1; i <= n; ++i) {
    p[0] = i;
    Eigen::Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Eigen::Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= m; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) continue;
        const double cur = a(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[ju];
        if (cur < minv[ju]) {
          minv[ju] = cur;
          way[ju] = j0;
        }
        if (minv[ju] < delta) {
          delta = minv[ju];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= m; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) {
          u[static_cast<std::size_t>(p[ju])] += delta;
          v[ju] -= delta;
        } else {
          minv[ju] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Eigen::Index> row_to_col(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 1; j <= m; ++j) {
    const Eigen::Index row = p[static_cast<std::size_t>(j)];
    if (row != 0) row_to_col[static_cast<std::size_t>(row - 1)] = j - 1;
  }
  return row_to_col;
}

}  // namespace

Assignment solve_assignment(const CostMatrix& cost) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  Assignment result;

  double max_abs = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!cost.admissible(i, j)) continue;
      if (!std::isfinite(cost.values(i, j))) throw ValidationError("non-finite admissible cost");
      max_abs = std::max(max_abs, std::abs(cost.values(i, j)));
      any = true;
    }
  }

  std::vector<char> row_used(static_cast<std::size_t>(n), 0);
  std::vector<char> col_used(static_cast<std::size_t>(m), 0);
  if (any) {
    // Inadmissible entries get a penalty larger than any cost difference a
    // full assignment can accumulate, so cardinality is maximised first.
    const double k = static_cast<double>(std::min(n, m));
    const double penalty = (2.0 * k + 1.0) * max_abs + 1.0;
    Eigen::MatrixXd work = cost.admissible.select(cost.values, Eigen::MatrixXd::Constant(n, m, penalty));
    const bool transposed = n > m;
    if (transposed) work.transposeInPlace();
    const auto row_to_col = hungarian(work);
    for (std::size_t r = 0; r < row_to_col.size(); ++r) {
      if (row_to_col[r] < 0) continue;
      Eigen::Index i = static_cast<Eigen::Index>(r);
      Eigen::Index j = row_to_col[r];
      if (transposed) std::swap(i, j);
      if (!cost.admissible(i, j)) continue;
      result.matches.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      row_used[static_cast<std::size_t>(i)] = 1;
      col_used[static_cast<std::size_t>(j)] = 1;
    }
    std::sort(result.matches.begin(), result.matches.end());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!row_used[static_cast<std::size_t>(i)]) result.unmatched_rows.push_back(static_cast<std::size_t>(i));
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!col_used[static_cast<std::size_t>(j)]) result.unmatched_cols.push_back(static_cast<std::size_t>(j));
  }
  return result;
}

}  // namespace mixtrack::assoc
