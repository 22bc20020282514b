#include "mixtrack/calib.hpp"

#include <cmath>
#include <numbers>

#include "mixtrack/error.hpp"

namespace mixtrack::calib {

namespace {

struct Trig {
  double sin;
  double cot;
};

Trig trig(double delta_deg) {
  // Exact values at the right angle keep the identity transform exact.
  if (delta_deg == 90.0) return {1.0, 0.0};
  const double rad = delta_deg * std::numbers::pi / 180.0;
  return {std::sin(rad), std::cos(rad) / std::sin(rad)};
}

}  // namespace

void CalibrationParams::validate() const {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw ValidationError("calibration phi must be positive");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ValidationError("calibration omega must be positive");
  if (!(delta_deg > 0.0 && delta_deg < 180.0)) throw ValidationError("calibration delta must lie strictly between 0 and 180 degrees");
  if (!std::isfinite(x0) || !std::isfinite(y0)) throw ValidationError("calibration reference coordinates must be finite");
}

Magnification derive_magnification(const ReferenceObject& ref) {
  if (!(ref.apparent_x_px > 0.0) || !(ref.apparent_y_px > 0.0)) {
    throw ValidationError("reference object apparent lengths must be positive");
  }
  if (!(ref.true_x_m > 0.0) || !(ref.true_y_m > 0.0)) {
    throw ValidationError("reference object true lengths must be positive");
  }
  return {ref.apparent_x_px / ref.true_x_m, ref.apparent_y_px / ref.true_y_m};
}

Point to_world(Point image, const CalibrationParams& p) {
  const auto t = trig(p.delta_deg);
  return {p.x0 + (image.x + p.phi * t.cot * image.y) / p.phi, p.y0 + image.y * t.sin / p.omega};
}

Point to_image(Point world, const CalibrationParams& p) {
  const auto t = trig(p.delta_deg);
  const double y = (world.y - p.y0) * p.omega / t.sin;
  const double x = (world.x - p.x0) * p.phi - p.phi * t.cot * y;
  return {x, y};
}

}  // namespace mixtrack::calib
