#pragma once

#include <array>

namespace stepsim {

struct BoundaryConstraints {
  double q0 = 0.0, qf = 0.0;
  double v0 = 0.0, vf = 0.0;
  double a0 = 0.0, af = 0.0;
};

struct TrajectorySample {
  double q = 0.0;
  double qdot = 0.0;
  double qddot = 0.0;
};

/// q(t) = c[0] + c[1] t + ... + c[5] t^5 on [0, duration].
struct QuinticSegment {
  std::array<double, 6> c{};
  double duration = 0.0;
};

/// Solves the six boundary conditions for the quintic coefficients.
/// Throws std::invalid_argument when duration <= 0 or inputs are non-finite.
QuinticSegment fit_quintic(const BoundaryConstraints& bc, double duration);

/// Rest-to-rest segment from q0 to qf.
QuinticSegment rest_to_rest(double q0, double qf, double duration);

/// Throws std::out_of_range for t outside [0, duration].
TrajectorySample sample(const QuinticSegment& seg, double t);

/// Peak |qddot| of a rest-to-rest quintic over `delta` in time T.
double rest_to_rest_peak_accel(double delta, double duration);

/// Duration at which a rest-to-rest quintic over `delta` peaks at `peak_accel`.
/// Zero displacement returns `min_duration`; the result is never shorter than
/// `min_duration`.
double duration_for_peak_accel(double delta, double peak_accel, double min_duration = 0.1);

}  // namespace stepsim
