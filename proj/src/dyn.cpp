#include "stepsim/dyn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stepsim {

// ---------------------------------------------------------------------------
// Energy
// ---------------------------------------------------------------------------

EnergyEntry motor_power(double torque, double velocity, const MotorParams& motor) {
  EnergyEntry e;
  e.torque = torque;
  e.velocity = velocity;
  e.current = torque / motor.torque_constant;
  const double p = torque * velocity;
  e.mechanical = p > 0.0 ? p : 0.0;
  e.heat = e.current * e.current * motor.resistance;
  return e;
}

double sample_power(const EnergySample& sample, std::span<const int> subset) {
  double p = 0.0;
  for (int i : subset) p += sample[i].total();
  return p;
}

double integrate_energy(std::span<const EnergySample> series, double dt, std::span<const int> subset) {
  double e = 0.0;
  for (const auto& s : series) e += sample_power(s, subset) * dt;
  return e;
}

void EnergyLedger::accumulate(const EnergySample& sample) {
  static const std::vector<int> all = all_actuators();
  static const std::vector<int> rear_set = rear_actuators();
  const double p_all = sample_power(sample, all);
  total += p_all * dt;
  if (armed) {
    whole += p_all * dt;
    rear += sample_power(sample, rear_set) * dt;
  }
}

// ---------------------------------------------------------------------------
// Support polygon and statics
// ---------------------------------------------------------------------------

namespace {

using Vec2 = Eigen::Vector2d;

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Counter-clockwise hull without collinear points.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

double polygon_margin(const std::vector<Vec3>& contacts, const Vec3& com) {
  if (contacts.size() < 3) throw SupportError("fewer than three supporting contacts");
  std::vector<Vec2> pts;
  pts.reserve(contacts.size());
  for (const auto& c : contacts) pts.emplace_back(c.x(), c.y());
  const auto hull = convex_hull(pts);
  const Vec2 p(com.x(), com.y());
  if (hull.size() < 3) {
    double d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < hull.size(); ++i) d = std::min(d, segment_distance(p, hull[i], hull[i + 1]));
    if (hull.size() == 1) d = (p - hull[0]).norm();
    return -d;
  }
  double inside = std::numeric_limits<double>::infinity();
  double outside = std::numeric_limits<double>::infinity();
  bool is_inside = true;
  for (size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    const double signed_d = cross2(a, b, p) / (b - a).norm();
    if (signed_d < 0.0) is_inside = false;
    inside = std::min(inside, signed_d);
    outside = std::min(outside, segment_distance(p, a, b));
  }
  return is_inside ? inside : -outside;
}

std::vector<double> support_forces(const SupportState& support) {
  const size_t n = support.contacts.size();
  if (n < 3) throw SupportError("fewer than three supporting contacts");
  if (!(support.weight >= 0.0)) throw SupportError("weight must be non-negative");
  const double margin = polygon_margin(support.contacts, support.com);
  if (margin < -1e-12) throw SupportError("COM projection outside the support polygon (tip-over)");

  std::vector<double> result(n, 0.0);
  if (support.weight == 0.0) return result;

  // Minimum-norm non-negative solution: the optimum is the equality-only
  // minimum-norm solution on its own support set, so enumerate support sets.
  const Eigen::Vector3d rhs(support.weight, 0.0, 0.0);
  double best_norm = std::numeric_limits<double>::infinity();
  const double tol = 1e-9 * support.weight;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    Eigen::MatrixXd a(3, idx.size());
    for (size_t k = 0; k < idx.size(); ++k) {
      const Vec3& c = support.contacts[idx[k]];
      a(0, k) = 1.0;
      a(1, k) = c.x() - support.com.x();
      a(2, k) = c.y() - support.com.y();
    }
    const Eigen::VectorXd f = a.completeOrthogonalDecomposition().solve(rhs);
    if ((a * f - rhs).norm() > tol) continue;
    if (f.minCoeff() < -1e-12 * support.weight) continue;
    const double norm = f.norm();
    if (norm < best_norm - 1e-15 * support.weight) {
      best_norm = norm;
      std::fill(result.begin(), result.end(), 0.0);
      for (size_t k = 0; k < idx.size(); ++k) result[idx[k]] = std::max(f[k], 0.0);
    }
  }
  if (!std::isfinite(best_norm)) throw SupportError("no non-negative force distribution exists");
  return result;
}

std::array<JointVector, kLegCount> joint_torques(const RobotModel& model, const RobotState& state,
                                                 const std::array<Vec3, kLegCount>& tip_forces) {
  std::array<JointVector, kLegCount> out;
  const Eigen::Matrix3d body_rot = state.body.rotation();
  for (LegId id : kAllLegs) {
    const LegChain& leg = model.leg(id);
    const JointVector& q = state.joints(id);
    const Eigen::Matrix3d r = body_rot * leg.mount.block<3, 3>(0, 0);
    JointVector tau = -(r * jacobian(leg, q)).transpose() * tip_forces[leg_index(id)];
    for (int i = 0; i < kJointsPerLeg; ++i) {
      const double m = model.link_mass(i);
      if (m <= 0.0) continue;
      const Jacobian jc = point_jacobian(leg, q, i, Vec3(-0.5 * leg.links[i].a, 0.0, 0.0));
      tau += (r * jc).transpose() * Vec3(0.0, 0.0, m * model.mass.gravity);
    }
    out[leg_index(id)] = tau;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rolling
// ---------------------------------------------------------------------------

double climb_start_distance(double step, double radius) {
  if (step >= radius) return radius;
  return std::sqrt(radius * radius - (radius - step) * (radius - step));
}

EdgeContact edge_contact(double x, double step, double radius) {
  EdgeContact c;
  if (x >= 0.0) {
    c.lift = step;
    return c;
  }
  const double d = climb_start_distance(step, radius);
  if (x < -d) return c;
  c.touching = true;
  if (step >= radius) {
    c.blocked = true;
    c.angle = M_PI_2;
    return c;
  }
  const double u = -x;  // horizontal distance to the edge
  c.angle = std::asin(std::min(1.0, u / radius));
  c.lift = step + std::sqrt(radius * radius - u * u) - radius;
  return c;
}

double wheelbase(const RobotModel& model) {
  const auto& fl = model.leg(LegId::kFrontLeft);
  const auto& rl = model.leg(LegId::kRearLeft);
  return tip_in_body(fl, fl.home()).x() - tip_in_body(rl, rl.home()).x();
}

RollingPose rolling_pose(const RobotModel& model, const StepScenario& scenario, double rear_x) {
  const double length = wheelbase(model);
  const double radius = model.track.edge_climb_radius;
  const double step = scenario.step_height;
  RollingPose pose;
  pose.rear_x = rear_x;
  pose.rear = edge_contact(rear_x, step, radius);

  // Pitch such that the front tips sit on their own lift profile.
  auto residual = [&](double pitch) {
    const double fx = rear_x + length * std::cos(pitch);
    return length * std::sin(pitch) - (edge_contact(fx, step, radius).lift - pose.rear.lift);
  };
  double lo = 0.0, hi = std::asin(std::min(1.0, step / length));
  double pitch = 0.0;
  if (residual(lo) < 0.0) {
    for (int i = 0; i < 100; ++i) {
      const double mid = 0.5 * (lo + hi);
      (residual(mid) < 0.0 ? lo : hi) = mid;
    }
    pitch = 0.5 * (lo + hi);
  }
  pose.front_x = rear_x + length * std::cos(pitch);
  pose.front = edge_contact(pose.front_x, step, radius);

  const auto& rl = model.leg(LegId::kRearLeft);
  const Vec3 rear_body = tip_in_body(rl, rl.home());
  pose.body.pitch = pitch;
  const Vec3 offset = pose.body.rotation() * rear_body;
  pose.body.x = rear_x - offset.x();
  pose.body.z = model.track.radius() + pose.rear.lift - offset.z();
  return pose;
}

RollingDrive rolling_drive(const RobotModel& model, const StepScenario& scenario, double rear_x,
                           int direction) {
  RollingDrive d;
  d.pose = rolling_pose(model, scenario, rear_x);
  d.state.body = d.pose.body;
  for (LegId id : kAllLegs) d.state.joints(id) = model.leg(id).home();

  SupportState support;
  for (LegId id : kAllLegs) support.contacts.push_back(tip_world(model, d.state, id));
  support.com = center_of_mass(model, d.state);
  support.weight = model.weight();
  const std::vector<double> vertical = support_forces(support);

  const bool front_climb = d.pose.front.touching;
  const bool rear_climb = d.pose.rear.touching;
  const EdgeContact& edge = front_climb ? d.pose.front : d.pose.rear;
  const double s = std::sin(edge.angle), c = std::cos(edge.angle);

  double n_climb = 0.0, n_other = 0.0;
  for (LegId id : kAllLegs) {
    const bool climbing = is_front(id) ? front_climb : rear_climb;
    (climbing ? n_climb : n_other) += vertical[leg_index(id)];
  }

  // Net tangential force / normal force needed for horizontal balance when
  // every track carries the same utilisation.
  double k_net = 0.0;
  if ((front_climb || rear_climb) && n_climb > 0.0) {
    const double sum = (n_other + n_climb) * c;
    const double root = std::sqrt(sum * sum + 4.0 * n_other * n_climb * s * s);
    k_net = 2.0 * n_climb * s / (sum + root);
  }
  const double dir = direction >= 0 ? 1.0 : -1.0;
  const double k_drive = k_net + dir * model.track.rolling_resistance;

  double carried = 0.0;
  for (LegId id : kAllLegs) {
    const int i = leg_index(id);
    const bool climbing = is_front(id) ? front_climb : rear_climb;
    if (climbing) {
      const double normal = vertical[i] / (c + k_net * s);
      d.normal[i] = normal;
      d.tip_force[i] = normal * (Vec3(-s, 0.0, c) + k_net * Vec3(c, 0.0, s));
    } else {
      d.normal[i] = vertical[i];
      d.tip_force[i] = Vec3(k_net * vertical[i], 0.0, vertical[i]);
    }
    d.track_torque[i] = model.track.radius() * k_drive * d.normal[i];
    carried += k_net * d.normal[i];
  }
  d.climb_force = carried;
  d.utilized_friction = std::abs(k_drive);
  d.feasible = !edge.blocked && d.utilized_friction <= model.track.friction;
  if ((front_climb && d.pose.front.blocked) || (rear_climb && d.pose.rear.blocked)) d.feasible = false;
  return d;
}

EnergySample rolling_energy(const RobotModel& model, const RollingDrive& drive, double speed) {
  EnergySample out;
  const auto tau = joint_torques(model, drive.state, drive.tip_force);
  const double omega = speed / model.track.radius();
  for (LegId id : kAllLegs) {
    for (int j = 0; j < kJointsPerLeg; ++j) {
      out[actuator_index(id, j)] = motor_power(tau[leg_index(id)][j], 0.0, model.leg_motor);
    }
    out[track_actuator(id)] = motor_power(drive.track_torque[leg_index(id)], omega, model.track_motor);
  }
  return out;
}

}  // namespace stepsim
