#include "stepsim/traj.hpp"

#include <cmath>
#include <stdexcept>

namespace stepsim {

QuinticSegment fit_quintic(const BoundaryConstraints& bc, double duration) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("quintic duration must be positive");
  }
  for (double v : {bc.q0, bc.qf, bc.v0, bc.vf, bc.a0, bc.af}) {
    if (!std::isfinite(v)) throw std::invalid_argument("boundary constraints must be finite");
  }
  const double T = duration, T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  const double dq = bc.qf - bc.q0;
  QuinticSegment s;
  s.duration = T;
  s.c[0] = bc.q0;
  s.c[1] = bc.v0;
  s.c[2] = 0.5 * bc.a0;
  s.c[3] = (20.0 * dq - (8.0 * bc.vf + 12.0 * bc.v0) * T - (3.0 * bc.a0 - bc.af) * T2) / (2.0 * T3);
  s.c[4] = (-30.0 * dq + (14.0 * bc.vf + 16.0 * bc.v0) * T + (3.0 * bc.a0 - 2.0 * bc.af) * T2) / (2.0 * T4);
  s.c[5] = (12.0 * dq - 6.0 * (bc.vf + bc.v0) * T - (bc.a0 - bc.af) * T2) / (2.0 * T5);
  return s;
}

QuinticSegment rest_to_rest(double q0, double qf, double duration) {
  return fit_quintic(BoundaryConstraints{q0, qf, 0.0, 0.0, 0.0, 0.0}, duration);
}

TrajectorySample sample(const QuinticSegment& seg, double t) {
  if (!(t >= 0.0 && t <= seg.duration)) {
    throw std::out_of_range("sample time outside [0, T]");
  }
  const auto& c = seg.c;
  TrajectorySample out;
  out.q = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
  out.qdot = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
  out.qddot = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
  return out;
}

// For q = q0 + delta * (10 s^3 - 15 s^4 + 6 s^5) the acceleration
// delta/T^2 * (60 s - 180 s^2 + 120 s^3) peaks at s = 1/2 -+ sqrt(3)/6
// with magnitude 10 |delta| / (sqrt(3) T^2).
double rest_to_rest_peak_accel(double delta, double duration) {
  return 10.0 * std::abs(delta) / (std::sqrt(3.0) * duration * duration);
}

double duration_for_peak_accel(double delta, double peak_accel, double min_duration) {
  if (!(peak_accel > 0.0) || !std::isfinite(peak_accel)) {
    throw std::invalid_argument("peak acceleration must be positive");
  }
  if (!std::isfinite(delta)) throw std::invalid_argument("displacement must be finite");
  if (delta == 0.0) return min_duration;
  const double t = std::sqrt(10.0 * std::abs(delta) / (std::sqrt(3.0) * peak_accel));
  return std::max(t, min_duration);
}

}  // namespace stepsim
