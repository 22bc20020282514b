#pragma once

// Skew correction from image coordinates to projected world coordinates.
//
//   Y' = Y0 + y sin(delta) / omega
//   X' = X0 + (x + phi cot(delta) y) / phi
//
// phi and omega are magnifications in pixels per metre along the two axes
// and delta is the angle of the skewed image axis with the world X axis.

namespace mixtrack::calib {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

struct CalibrationParams {
  double phi = 1.0;
  double omega = 1.0;
  double delta_deg = 90.0;
  double x0 = 0.0;
  double y0 = 0.0;

  /// Throws ValidationError unless phi, omega > 0 and 0 < delta < 180.
  void validate() const;
  static CalibrationParams identity() { return {}; }
};

/// A feature of known size: true lengths in metres and apparent lengths in
/// pixels along each axis.
struct ReferenceObject {
  double true_x_m = 1.0;
  double true_y_m = 1.0;
  double apparent_x_px = 1.0;
  double apparent_y_px = 1.0;
};

struct Magnification {
  double phi;
  double omega;
};

/// Apparent over true length per axis, so that to_world maps the object's
/// apparent extent back onto its true extent.
Magnification derive_magnification(const ReferenceObject& ref);

Point to_world(Point image, const CalibrationParams& p);

/// Exact inverse of to_world.
Point to_image(Point world, const CalibrationParams& p);

inline constexpr double kFeetToMetres = 0.3048;

}  // namespace mixtrack::calib
