#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stepsim {

/// Homogeneous 4x4 transform (rotation + translation in metres).
using Transform = Eigen::Matrix4d;
/// Joint angles theta1..theta4, proximal to distal, radians.
using JointVector = Eigen::Vector4d;
using Vec3 = Eigen::Vector3d;
/// Position Jacobian of the track tip, m/rad.
using Jacobian = Eigen::Matrix<double, 3, 4>;

inline constexpr int kJointsPerLeg = 4;
inline constexpr int kLegCount = 4;

/// One zero vector per leg. Eigen leaves fixed-size vectors uninitialized,
/// so `std::array<Vec3, kLegCount> a{}` is not zero.
template <typename V>
std::array<V, kLegCount> zeros_per_leg() {
  std::array<V, kLegCount> a;
  a.fill(V::Zero());
  return a;
}

class KinematicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JointLimitError : public KinematicsError {
 public:
  JointLimitError(int joint, double value);
  int joint() const { return joint_; }
  double value() const { return value_; }

 private:
  int joint_;
  double value_;
};

/// Thrown by inverse_kinematics. `residual()` is the best tip error reached.
class IkError : public KinematicsError {
 public:
  enum class Kind { kUnreachable, kNotConverged };
  IkError(Kind kind, double residual, const std::string& what);
  Kind kind() const { return kind_; }
  double residual() const { return residual_; }

 private:
  Kind kind_;
  double residual_;
};

/// One row of the D-H table: Rz(theta) * Tz(b) * Tx(a) * Rx(alpha).
struct DHLink {
  double b = 0.0;
  double a = 0.0;
  double alpha = 0.0;
  double theta_home = 0.0;
  double theta_min = -M_PI_2;
  double theta_max = M_PI_2;

  /// Throws std::invalid_argument when a field is non-finite or the limits
  /// do not bracket theta_home.
  void validate() const;
};

enum class LegId { kFrontLeft = 0, kFrontRight = 1, kRearLeft = 2, kRearRight = 3 };

inline constexpr std::array<LegId, kLegCount> kAllLegs = {
    LegId::kFrontLeft, LegId::kFrontRight, LegId::kRearLeft, LegId::kRearRight};

const char* leg_name(LegId id);
LegId leg_from_name(const std::string& name);
inline bool is_front(LegId id) { return id == LegId::kFrontLeft || id == LegId::kFrontRight; }
inline bool is_left(LegId id) { return id == LegId::kFrontLeft || id == LegId::kRearLeft; }
inline int leg_index(LegId id) { return static_cast<int>(id); }

struct LegChain {
  std::array<DHLink, kJointsPerLeg> links;
  /// Body frame -> shoulder frame (Frame 1).
  Transform mount = Transform::Identity();
  LegId side = LegId::kFrontLeft;

  JointVector home() const;
  void validate() const;
};

/// The front-left leg with the published D-H values and default limits of
/// +-pi/2 around `home`.
LegChain front_left_reference(const JointVector& home);

/// Standard D-H elementary transform for one link at joint angle `theta`.
Transform link_transform(const DHLink& link, double theta);

/// Shoulder frame -> track tip. Throws JointLimitError when q leaves the
/// limits (tolerance 1e-12 rad).
Transform forward_kinematics(const LegChain& leg, const JointVector& q);

/// Closed-form shoulder -> tip transform of the front-left leg geometry
/// (alpha1 = pi/2, remaining twists zero, a1 = b1 = 0). Only valid for chains
/// of that shape; used as an independent check of the product form.
Transform closed_form_front_left(const LegChain& leg, const JointVector& q);

/// Tip position expressed in the body frame (mount applied).
Vec3 tip_in_body(const LegChain& leg, const JointVector& q);

/// d(tip position)/d(theta_j) in the shoulder frame.
Jacobian jacobian(const LegChain& leg, const JointVector& q);

/// Position Jacobian of an arbitrary point rigidly attached to link
/// `link_index` (0-based; the point is given in that link's distal frame).
/// Columns of joints beyond `link_index` are zero.
Jacobian point_jacobian(const LegChain& leg, const JointVector& q, int link_index,
                        const Vec3& point_in_link);

/// Position of a point attached to link `link_index`, shoulder frame.
Vec3 point_position(const LegChain& leg, const JointVector& q, int link_index,
                    const Vec3& point_in_link);

struct IkOptions {
  double damping = 1e-3;
  int max_iterations = 200;
  double tolerance = 1e-8;
  /// When the descent from the seed stalls, retry from a fixed grid of
  /// in-limit seeds, nearest first. For cold starts without a meaningful
  /// seed; trajectory tracking leaves it off so solutions stay continuous.
  bool restarts = false;
};

/// Damped least-squares position IK in the shoulder frame, iterating from
/// `seed`. Joint limits are enforced by clamping after every update.
/// Throws IkError when the target is out of reach or the iteration stalls.
JointVector inverse_kinematics(const LegChain& leg, const Vec3& target, const JointVector& seed,
                               const IkOptions& options = {});

/// Outer radius of the tip workspace about the joint-1 axis origin.
double reach_bound(const LegChain& leg);

/// Signs s such that q_side = s .* q_front_left gives the mirrored posture.
JointVector mirror_signs(LegId side);

/// Builds the chain for `side` from the canonical front-left chain. The
/// shoulder position is mirrored through the sagittal (y) and/or transverse
/// (x) planes and joint home/limits are sign-flipped as required.
LegChain mirror_leg(const LegChain& front_left, LegId side);

bool within_limits(const LegChain& leg, const JointVector& q, double tol = 1e-12);

/// Rotation-block orthonormality error max|R^T R - I|.
double orthonormality_error(const Transform& t);

/// Wraps an angle to (-pi, pi].
double normalize_angle(double a);

}  // namespace stepsim
