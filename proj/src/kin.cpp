#include "stepsim/kin.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

namespace stepsim {

namespace {

constexpr double kLimitTol = 1e-12;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

Eigen::Matrix3d reflection(LegId side) {
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if (!is_left(side)) s(1, 1) = -1.0;
  if (!is_front(side)) s(0, 0) = -1.0;
  return s;
}

// Tip and link frames (shoulder frame) for every joint, frames[0] = identity.
std::array<Transform, kJointsPerLeg + 1> chain_frames(const LegChain& leg, const JointVector& q) {
  std::array<Transform, kJointsPerLeg + 1> frames;
  frames[0] = Transform::Identity();
  for (int i = 0; i < kJointsPerLeg; ++i) {
    frames[i + 1] = frames[i] * link_transform(leg.links[i], q[i]);
  }
  return frames;
}

void check_limits(const LegChain& leg, const JointVector& q) {
  for (int i = 0; i < kJointsPerLeg; ++i) {
    if (!std::isfinite(q[i])) throw JointLimitError(i, q[i]);
    const auto& l = leg.links[i];
    if (q[i] < l.theta_min - kLimitTol || q[i] > l.theta_max + kLimitTol) {
      throw JointLimitError(i, q[i]);
    }
  }
}

JointVector clamp_to_limits(const LegChain& leg, JointVector q) {
  for (int i = 0; i < kJointsPerLeg; ++i) {
    q[i] = std::clamp(q[i], leg.links[i].theta_min, leg.links[i].theta_max);
  }
  return q;
}

std::string format_joint_error(int joint, double value) {
  std::ostringstream os;
  os << "joint " << (joint + 1) << " value " << value << " rad outside its limits";
  return os.str();
}

}  // namespace

JointLimitError::JointLimitError(int joint, double value)
    : KinematicsError(format_joint_error(joint, value)), joint_(joint), value_(value) {}

IkError::IkError(Kind kind, double residual, const std::string& what)
    : KinematicsError(what), kind_(kind), residual_(residual) {}

void DHLink::validate() const {
  require_finite(b, "b");
  require_finite(a, "a");
  require_finite(alpha, "alpha");
  require_finite(theta_home, "theta_home");
  require_finite(theta_min, "theta_min");
  require_finite(theta_max, "theta_max");
  if (!(theta_min < theta_max)) {
    throw std::invalid_argument("theta_min must be below theta_max");
  }
  if (theta_home < theta_min || theta_home > theta_max) {
    throw std::invalid_argument("theta_home outside [theta_min, theta_max]");
  }
}

const char* leg_name(LegId id) {
  switch (id) {
    case LegId::kFrontLeft: return "front_left";
    case LegId::kFrontRight: return "front_right";
    case LegId::kRearLeft: return "rear_left";
    case LegId::kRearRight: return "rear_right";
  }
  return "?";
}

LegId leg_from_name(const std::string& name) {
  for (LegId id : kAllLegs) {
    if (name == leg_name(id)) return id;
  }
  throw std::invalid_argument("unknown leg name '" + name + "'");
}

JointVector LegChain::home() const {
  JointVector q;
  for (int i = 0; i < kJointsPerLeg; ++i) q[i] = links[i].theta_home;
  return q;
}

void LegChain::validate() const {
  for (const auto& l : links) l.validate();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) require_finite(mount(r, c), "mount");
  }
  if (orthonormality_error(mount) > 1e-9 || std::abs(mount.block<3, 3>(0, 0).determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("mount rotation is not a proper rotation");
  }
}

LegChain front_left_reference(const JointVector& home) {
  LegChain leg;
  const std::array<double, 4> b = {0.0, 0.1020, 0.0185, 0.0285};
  const std::array<double, 4> a = {0.0, 0.1330, 0.1850, 0.2196};
  const std::array<double, 4> alpha = {M_PI_2, 0.0, 0.0, 0.0};
  for (int i = 0; i < kJointsPerLeg; ++i) {
    leg.links[i] = DHLink{b[i], a[i], alpha[i], home[i], home[i] - M_PI_2, home[i] + M_PI_2};
  }
  // x1 forward, z1 down: joint 1 yaws about the vertical and the planar
  // joints lower the tip for positive angles.
  leg.mount = Transform::Identity();
  leg.mount.block<3, 3>(0, 0) = Vec3(1.0, -1.0, -1.0).asDiagonal();
  leg.side = LegId::kFrontLeft;
  return leg;
}

Transform link_transform(const DHLink& link, double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("joint angle must be finite");
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(link.alpha), sa = std::sin(link.alpha);
  Transform t;
  t << ct, -st * ca, st * sa, link.a * ct,
       st, ct * ca, -ct * sa, link.a * st,
       0.0, sa, ca, link.b,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

Transform forward_kinematics(const LegChain& leg, const JointVector& q) {
  check_limits(leg, q);
  return chain_frames(leg, q)[kJointsPerLeg];
}

Transform closed_form_front_left(const LegChain& leg, const JointVector& q) {
  const double b = leg.links[1].b + leg.links[2].b + leg.links[3].b;
  const double a2 = leg.links[1].a, a3 = leg.links[2].a, a4 = leg.links[3].a;
  const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
  const double c2 = std::cos(q[1]), s2 = std::sin(q[1]);
  const double c23 = std::cos(q[1] + q[2]), s23 = std::sin(q[1] + q[2]);
  const double c234 = std::cos(q[1] + q[2] + q[3]), s234 = std::sin(q[1] + q[2] + q[3]);
  const double planar = a2 * c2 + a3 * c23 + a4 * c234;
  Transform t;
  t << c1 * c234, -c1 * s234, s1, b * s1 + c1 * planar,
       s1 * c234, -s1 * s234, -c1, -b * c1 + s1 * planar,
       s234, c234, 0.0, a2 * s2 + a3 * s23 + a4 * s234,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

Vec3 tip_in_body(const LegChain& leg, const JointVector& q) {
  const Transform t = leg.mount * forward_kinematics(leg, q);
  return t.block<3, 1>(0, 3);
}

Jacobian jacobian(const LegChain& leg, const JointVector& q) {
  return point_jacobian(leg, q, kJointsPerLeg - 1, Vec3::Zero());
}

Jacobian point_jacobian(const LegChain& leg, const JointVector& q, int link_index,
                        const Vec3& point_in_link) {
  const auto frames = chain_frames(leg, q);
  const Vec3 p = (frames[link_index + 1] * point_in_link.homogeneous()).head<3>();
  Jacobian j = Jacobian::Zero();
  for (int k = 0; k <= link_index; ++k) {
    const Vec3 axis = frames[k].block<3, 1>(0, 2);
    const Vec3 origin = frames[k].block<3, 1>(0, 3);
    j.col(k) = axis.cross(p - origin);
  }
  return j;
}

Vec3 point_position(const LegChain& leg, const JointVector& q, int link_index,
                    const Vec3& point_in_link) {
  const auto frames = chain_frames(leg, q);
  return (frames[link_index + 1] * point_in_link.homogeneous()).head<3>();
}

double reach_bound(const LegChain& leg) {
  // Planar reach of links 2..4 combined with the lateral offsets, plus any
  // joint-1 link length.
  double planar = 0.0, lateral = 0.0, first = 0.0;
  for (int i = 0; i < kJointsPerLeg; ++i) {
    if (i == 0) {
      first = std::hypot(leg.links[i].a, leg.links[i].b);
    } else {
      planar += std::abs(leg.links[i].a);
      lateral += leg.links[i].b;
    }
  }
  return first + std::hypot(planar, lateral);
}

constexpr double kDampingScale = 0.01;  // m

namespace {

// One damped least-squares descent from q. Returns the best iterate and its
// residual.
std::pair<JointVector, double> dls_descent(const LegChain& leg, const Vec3& target, JointVector q,
                                           const IkOptions& options) {
  Vec3 err = target - forward_kinematics(leg, q).block<3, 1>(0, 3);
  JointVector best = q;
  double best_norm = err.norm();
  for (int it = 0; it < options.max_iterations && best_norm > options.tolerance; ++it) {
    // Damping fades with the residual so small corrections near a
    // singularity are not stalled.
    const double lambda = options.damping * std::min(1.0, err.norm() / kDampingScale);
    const double lambda2 = lambda * lambda;
    Jacobian j = jacobian(leg, q);
    JointVector dq = j.transpose() * (j * j.transpose() + lambda2 * Eigen::Matrix3d::Identity()).ldlt().solve(err);
    // Joints pinned at a limit and pushed outward drop out of the solve so
    // the remaining joints carry the correction.
    bool pinned = false;
    for (int i = 0; i < kJointsPerLeg; ++i) {
      const auto& l = leg.links[i];
      if ((q[i] <= l.theta_min && dq[i] < 0.0) || (q[i] >= l.theta_max && dq[i] > 0.0)) {
        j.col(i).setZero();
        pinned = true;
      }
    }
    if (pinned) {
      dq = j.transpose() * (j * j.transpose() + lambda2 * Eigen::Matrix3d::Identity()).ldlt().solve(err);
    }
    q = clamp_to_limits(leg, q + dq);
    err = target - forward_kinematics(leg, q).block<3, 1>(0, 3);
    const double n = err.norm();
    if (n < best_norm) {
      best_norm = n;
      best = q;
    }
  }
  return {best, best_norm};
}

// Restart seeds for when the descent from the caller's seed stalls against a
// limit: a coarse grid over the limit box, nearest to the seed first.
std::vector<JointVector> restart_seeds(const LegChain& leg, const JointVector& seed) {
  constexpr int kLevels = 4;
  std::vector<JointVector> out;
  for (int n = 0; n < kLevels * kLevels * kLevels * kLevels; ++n) {
    JointVector q;
    int code = n;
    for (int i = 0; i < kJointsPerLeg; ++i) {
      const auto& l = leg.links[i];
      const double f = (code % kLevels + 0.5) / kLevels;
      code /= kLevels;
      q[i] = l.theta_min + f * (l.theta_max - l.theta_min);
    }
    out.push_back(q);
  }
  std::stable_sort(out.begin(), out.end(), [&](const JointVector& a, const JointVector& b) {
    return (a - seed).squaredNorm() < (b - seed).squaredNorm();
  });
  return out;
}

}  // namespace

JointVector inverse_kinematics(const LegChain& leg, const Vec3& target, const JointVector& seed,
                               const IkOptions& options) {
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(target[i])) throw std::invalid_argument("IK target must be finite");
  }
  if (target.norm() > reach_bound(leg) + options.tolerance) {
    throw IkError(IkError::Kind::kUnreachable, target.norm() - reach_bound(leg),
                  "IK target beyond the reach bound of the leg");
  }
  check_limits(leg, seed);

  auto [best, best_norm] = dls_descent(leg, target, seed, options);
  if (best_norm <= options.tolerance) return best;
  if (options.restarts) {
    for (const JointVector& start : restart_seeds(leg, seed)) {
      auto [q, n] = dls_descent(leg, target, start, options);
      if (n <= options.tolerance) return q;
      if (n < best_norm) best_norm = n;
    }
  }
  std::ostringstream os;
  os << "IK did not converge for " << leg_name(leg.side) << " (residual " << best_norm << " m)";
  throw IkError(IkError::Kind::kNotConverged, best_norm, os.str());
}

JointVector mirror_signs(LegId side) {
  // One reflection flips the planar joints; two reflections are a rotation.
  if (is_left(side) == is_front(side)) return JointVector(1, 1, 1, 1);
  return JointVector(1, -1, -1, -1);
}

LegChain mirror_leg(const LegChain& front_left, LegId side) {
  LegChain out = front_left;
  out.side = side;
  if (side == LegId::kFrontLeft) return out;

  const Eigen::Matrix3d s = reflection(side);
  const JointVector signs = mirror_signs(side);
  Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
  if (signs[1] < 0) flip(2, 2) = -1.0;

  out.mount.block<3, 3>(0, 0) = s * front_left.mount.block<3, 3>(0, 0) * flip;
  out.mount.block<3, 1>(0, 3) = s * front_left.mount.block<3, 1>(0, 3);
  for (int i = 0; i < kJointsPerLeg; ++i) {
    if (signs[i] > 0) continue;
    auto& l = out.links[i];
    const auto& src = front_left.links[i];
    l.theta_home = -src.theta_home;
    l.theta_min = -src.theta_max;
    l.theta_max = -src.theta_min;
  }
  return out;
}

bool within_limits(const LegChain& leg, const JointVector& q, double tol) {
  for (int i = 0; i < kJointsPerLeg; ++i) {
    if (!(q[i] >= leg.links[i].theta_min - tol && q[i] <= leg.links[i].theta_max + tol)) return false;
  }
  return true;
}

double orthonormality_error(const Transform& t) {
  const Eigen::Matrix3d r = t.block<3, 3>(0, 0);
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace stepsim
