#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "mixtrack/error.hpp"
#include "mixtrack/motion.hpp"

using namespace mixtrack;
using namespace mixtrack::motion;

namespace {

double min_eigenvalue(const Matrix8& m) { return Eigen::SelfAdjointEigenSolver<Matrix8>(m).eigenvalues().minCoeff(); }

void expect_symmetric_psd(const Matrix8& m) {
  EXPECT_LE((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GE(min_eigenvalue(m), -1e-9);
}

// Process and measurement noise matched to exact, noiseless motion.
NoiseModel noiseless_model() {
  NoiseModel n;
  n.position_weight = 1e-9;
  n.velocity_weight = 1e-9;
  n.aspect_measurement_std = 1e-9;
  n.aspect_process_std = 1e-9;
  n.aspect_velocity_std = 1e-9;
  return n;
}

struct Motion {
  Vector4 start;
  Vector4 velocity;
};

Motion random_motion(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.0, 1500.0);
  std::uniform_real_distribution<double> vel(-12.0, 12.0);
  std::uniform_real_distribution<double> aspect(0.3, 3.0);
  // Height stays positive over 200 frames.
  std::uniform_real_distribution<double> height(120.0, 200.0);
  std::uniform_real_distribution<double> dh(-0.5, 0.5);
  Motion m;
  m.start << pos(rng), pos(rng), aspect(rng), height(rng);
  m.velocity << vel(rng), vel(rng), 0.0, dh(rng);
  return m;
}

// Runs predict/update against exact linear motion; returns the final state.
TrackState track_motion(const KalmanFilter& kf, const Motion& m, int steps) {
  auto state = kf.initiate(BBox::from_center(m.start(0), m.start(1), m.start(2), m.start(3)));
  for (int k = 1; k <= steps; ++k) state = kf.update(kf.predict(state), m.start + k * m.velocity);
  return state;
}

}  // namespace

TEST(KalmanInitiate, MeanFromBox) {
  const KalmanFilter kf;
  auto s = kf.initiate({0, 0, 50, 100});
  Vector8 expected;
  expected << 25, 50, 0.5, 100, 0, 0, 0, 0;
  EXPECT_EQ(s.mean, expected);
  s = kf.initiate({10, 10, 100, 100});
  EXPECT_EQ(s.mean(2), 1.0);
  expect_symmetric_psd(s.covariance);
}

TEST(KalmanInitiate, RejectsDegenerateBox) {
  const KalmanFilter kf;
  EXPECT_THROW(kf.initiate({0, 0, 0, 10}), ValidationError);
  EXPECT_THROW(kf.initiate({0, 0, 10, -1}), ValidationError);
}

TEST(KalmanPredict, ConstantVelocityStep) {
  const KalmanFilter kf;
  TrackState s = kf.initiate({0, 0, 100, 100});
  s.mean << 10, 10, 1, 100, 2, 3, 0, 0;
  const auto p = kf.predict(s);
  EXPECT_EQ(p.mean.head<4>(), Vector4(12, 13, 1, 100));
  EXPECT_EQ(p.mean.tail<4>(), s.mean.tail<4>());
  EXPECT_GT(p.covariance.trace(), s.covariance.trace());

  s.mean.tail<4>().setZero();
  EXPECT_EQ(kf.predict(s).mean.head<4>(), s.mean.head<4>());
}

TEST(KalmanProject, SelectsAndAddsNoise) {
  NoiseModel noise;
  noise.fixed_measurement_noise = Matrix4::Identity();
  const KalmanFilter kf(noise);
  TrackState s;
  s.mean << 1, 2, 3, 4, 5, 6, 7, 8;
  s.covariance = Matrix8::Identity();
  const auto proj = kf.project(s);
  EXPECT_EQ(proj.mean, Vector4(1, 2, 3, 4));
  EXPECT_EQ(proj.covariance, Matrix4(2 * Matrix4::Identity()));
}

TEST(KalmanProject, SingularInnovationThrows) {
  NoiseModel noise;
  noise.fixed_measurement_noise = Matrix4::Zero();
  const KalmanFilter kf(noise);
  TrackState s;
  s.mean << 1, 1, 1, 10, 0, 0, 0, 0;
  s.covariance = Matrix8::Zero();
  EXPECT_THROW(kf.project(s), NumericalError);
}

TEST(KalmanProject, InnovationExceedsMeasurementNoise) {
  std::mt19937_64 rng(1);
  const KalmanFilter kf;
  for (int i = 0; i < 200; ++i) {
    const auto m = random_motion(rng);
    const auto s = kf.predict(track_motion(kf, m, i % 5));
    const auto proj = kf.project(s);
    const Matrix4 diff = proj.covariance - kf.measurement_noise(s);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix4>(diff).eigenvalues().minCoeff(), -1e-9);
  }
}

TEST(KalmanUpdate, ZeroInnovationKeepsMean) {
  const KalmanFilter kf;
  const auto s = kf.predict(kf.initiate({100, 100, 40, 80}));
  const auto u = kf.update(s, kf.project(s).mean);
  EXPECT_NEAR((u.mean.head<4>() - s.mean.head<4>()).cwiseAbs().maxCoeff(), 0.0, 1e-9);
}

TEST(KalmanUpdate, PerfectMeasurementLimit) {
  NoiseModel noise;
  noise.fixed_measurement_noise = Matrix4(1e-12 * Matrix4::Identity());
  const KalmanFilter kf(noise);
  const auto s = kf.predict(kf.initiate({100, 100, 40, 80}));
  const Vector4 z(130.0, 135.0, 0.55, 82.0);
  const auto u = kf.update(s, z);
  EXPECT_LE((u.mean.head<4>() - z).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KalmanUpdate, PosteriorBetweenPriorAndMeasurement) {
  const KalmanFilter kf;
  const auto s = kf.predict(kf.initiate({100, 100, 40, 80}));
  const Vector4 z(110.0, 90.0, 0.6, 85.0);
  const auto u = kf.update(s, z);
  for (int i = 0; i < 4; ++i) {
    EXPECT_GE(u.mean(i), std::min(s.mean(i), z(i)));
    EXPECT_LE(u.mean(i), std::max(s.mean(i), z(i)));
  }
}

TEST(KalmanUpdate, ClampsShapeFloor) {
  NoiseModel noise;
  noise.fixed_measurement_noise = Matrix4(1e-12 * Matrix4::Identity());
  const KalmanFilter kf(noise);
  const auto s = kf.predict(kf.initiate({100, 100, 40, 80}));
  const auto u = kf.update(s, Vector4(120.0, 140.0, -0.5, -3.0));
  EXPECT_EQ(u.mean(2), KalmanFilter::kMinShape);
  EXPECT_EQ(u.mean(3), KalmanFilter::kMinShape);
}

TEST(KalmanProperties, PredictThenUpdateWithProjectionIsFixedPoint) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pos(0.0, 1500.0);
  std::uniform_real_distribution<double> vel(-10.0, 10.0);
  std::uniform_real_distribution<double> aspect(0.3, 3.0);
  std::uniform_real_distribution<double> height(20.0, 200.0);
  const KalmanFilter kf;
  for (int i = 0; i < 1000; ++i) {
    auto s = kf.initiate(BBox::from_center(pos(rng), pos(rng), aspect(rng), height(rng)));
    s.mean.tail<4>() << vel(rng), vel(rng), 0.0, 0.1 * vel(rng);
    const auto p = kf.predict(s);
    const auto u = kf.update(p, kf.project(p).mean);
    EXPECT_LE((u.mean.head<4>() - p.mean.head<4>()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(KalmanProperties, CovarianceStaysSymmetricPsd) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> jitter(0.0, 2.0);
  const KalmanFilter kf;
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_motion(rng);
    auto s = kf.initiate(BBox::from_center(m.start(0), m.start(1), m.start(2), m.start(3)));
    for (int k = 1; k <= 30; ++k) {
      s = kf.predict(s);
      expect_symmetric_psd(s.covariance);
      Vector4 z = m.start + k * m.velocity;
      z(0) += jitter(rng);
      z(1) += jitter(rng);
      if (k % 4 != 0) {
        s = kf.update(s, z);
        expect_symmetric_psd(s.covariance);
      }
    }
  }
}

TEST(KalmanConvergence, MatchedNoiseRecoversExactMotion) {
  std::mt19937_64 rng(4);
  const KalmanFilter kf(noiseless_model());
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_motion(rng);
    const auto s10 = track_motion(kf, m, 10);
    EXPECT_LT((s10.mean.head<4>() - (m.start + 10 * m.velocity)).cwiseAbs().maxCoeff(), 1e-6);
    const auto s20 = track_motion(kf, m, 20);
    EXPECT_LT((s20.mean.tail<4>() - m.velocity).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(KalmanConvergence, DefaultNoiseConvergesAsymptotically) {
  std::mt19937_64 rng(5);
  const KalmanFilter kf;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_motion(rng);
    const auto s = track_motion(kf, m, 200);
    EXPECT_LT((s.mean.head<4>() - (m.start + 200 * m.velocity)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((s.mean.tail<4>() - m.velocity).cwiseAbs().maxCoeff(), 1e-3);
  }
}
