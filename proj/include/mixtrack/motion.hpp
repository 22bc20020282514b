#pragma once

// Constant-velocity Kalman filter over (u, v, aspect, h) and their per-frame
// velocities. Noise is proportional to the box height.

#include <Eigen/Dense>
#include <optional>

#include "mixtrack/detstream.hpp"

namespace mixtrack::motion {

using Vector8 = Eigen::Matrix<double, 8, 1>;
using Matrix8 = Eigen::Matrix<double, 8, 8>;
using Vector4 = Eigen::Matrix<double, 4, 1>;
using Matrix4 = Eigen::Matrix<double, 4, 4>;

struct TrackState {
  Vector8 mean = Vector8::Zero();
  Matrix8 covariance = Matrix8::Identity();

  /// Current box estimate in pixel top-left form.
  BBox box() const { return BBox::from_center(mean(0), mean(1), mean(2), mean(3)); }
};

/// A track distribution projected into measurement space.
struct MeasurementProjection {
  Vector4 mean = Vector4::Zero();
  Matrix4 covariance = Matrix4::Identity();
};

struct NoiseModel {
  double position_weight = 1.0 / 20.0;
  double velocity_weight = 1.0 / 160.0;
  /// Initial velocity std is initial_velocity_weight * h.
  double initial_velocity_weight = 10.0 / 160.0;
  double aspect_measurement_std = 1e-1;
  double aspect_process_std = 1e-2;
  double aspect_velocity_std = 1e-5;
  /// Replaces the height-scaled measurement noise when set.
  std::optional<Matrix4> fixed_measurement_noise;
};

/// Box measurement (u, v, aspect, h).
Vector4 to_measurement(const BBox& box);

class KalmanFilter {
public:
  /// Condition number of S above which projection is treated as singular.
  static constexpr double kMaxCondition = 1e12;
  /// Floor for aspect ratio and height after an update.
  static constexpr double kMinShape = 1e-6;

  KalmanFilter() = default;
  explicit KalmanFilter(NoiseModel noise) : noise_(std::move(noise)) {}

  const NoiseModel& noise() const { return noise_; }

  TrackState initiate(const BBox& box) const;
  TrackState predict(const TrackState& state) const;
  MeasurementProjection project(const TrackState& state) const;
  TrackState update(const TrackState& state, const Vector4& measurement) const;

  Matrix4 measurement_noise(const TrackState& state) const;
  Matrix8 process_noise(const TrackState& state) const;

private:
  NoiseModel noise_;
};

}  // namespace mixtrack::motion
