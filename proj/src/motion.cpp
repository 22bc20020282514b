#include "mixtrack/motion.hpp"

#include <algorithm>
#include <cmath>

#include "mixtrack/error.hpp"

namespace mixtrack::motion {

namespace {

Matrix8 transition() {
  Matrix8 f = Matrix8::Identity();
  for (int i = 0; i < 4; ++i) f(i, i + 4) = 1.0;
  return f;
}

const Matrix8& kTransition() {
  static const Matrix8 f = transition();
  return f;
}

void check_conditioning(const Matrix4& s) {
  Eigen::SelfAdjointEigenSolver<Matrix4> eig(s, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > KalmanFilter::kMaxCondition) {
    throw NumericalError("innovation covariance is singular or ill-conditioned");
  }
}

}  // namespace

Vector4 to_measurement(const BBox& box) {
  return Vector4(box.center_x(), box.center_y(), box.aspect(), box.h);
}

TrackState KalmanFilter::initiate(const BBox& box) const {
  if (!(box.w > 0.0) || !(box.h > 0.0)) throw ValidationError("cannot initiate a track from a box with non-positive size");
  TrackState s;
  s.mean.head<4>() = to_measurement(box);
  s.mean.tail<4>().setZero();

  const double h = box.h;
  const double pos = 2.0 * noise_.position_weight * h;
  const double vel = noise_.initial_velocity_weight * h;
  Vector8 std;
  std << pos, pos, 1e-2, pos, vel, vel, 1e-5, vel;
  s.covariance = std.array().square().matrix().asDiagonal();
  return s;
}

Matrix8 KalmanFilter::process_noise(const TrackState& state) const {
  const double h = state.mean(3);
  const double pos = noise_.position_weight * h;
  const double vel = noise_.velocity_weight * h;
  Vector8 std;
  std << pos, pos, noise_.aspect_process_std, pos, vel, vel, noise_.aspect_velocity_std, vel;
  return std.array().square().matrix().asDiagonal();
}

Matrix4 KalmanFilter::measurement_noise(const TrackState& state) const {
  if (noise_.fixed_measurement_noise) return *noise_.fixed_measurement_noise;
  const double pos = noise_.position_weight * state.mean(3);
  Vector4 std(pos, pos, noise_.aspect_measurement_std, pos);
  return std.array().square().matrix().asDiagonal();
}

TrackState KalmanFilter::predict(const TrackState& state) const {
  const Matrix8& f = kTransition();
  TrackState out;
  out.mean = f * state.mean;
  // Q uses the pre-step height.
  out.covariance = f * state.covariance * f.transpose() + process_noise(state);
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

MeasurementProjection KalmanFilter::project(const TrackState& state) const {
  MeasurementProjection p;
  p.mean = state.mean.head<4>();
  p.covariance = state.covariance.topLeftCorner<4, 4>() + measurement_noise(state);
  p.covariance = 0.5 * (p.covariance + p.covariance.transpose()).eval();
  check_conditioning(p.covariance);
  return p;
}

TrackState KalmanFilter::update(const TrackState& state, const Vector4& measurement) const {
  const MeasurementProjection proj = project(state);
  Eigen::LLT<Matrix4> llt(proj.covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("innovation covariance is not positive definite");

  // K = P H^T S^-1, computed as (S^-1 H P)^T.
  const Eigen::Matrix<double, 4, 8> hp = state.covariance.topRows<4>();
  const Eigen::Matrix<double, 8, 4> gain = llt.solve(hp).transpose();

  TrackState out;
  out.mean = state.mean + gain * (measurement - proj.mean);
  // Joseph form keeps the posterior symmetric PSD.
  Eigen::Matrix<double, 8, 8> ikh = Matrix8::Identity();
  ikh.leftCols<4>() -= gain;
  const Matrix4 r = measurement_noise(state);
  out.covariance = ikh * state.covariance * ikh.transpose() + gain * r * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();

  out.mean(2) = std::max(out.mean(2), kMinShape);
  out.mean(3) = std::max(out.mean(3), kMinShape);
  return out;
}

}  // namespace mixtrack::motion
