#pragma once

#include <array>

#include "stepsim/kin.hpp"
#include "stepsim/model.hpp"

namespace stepsim {

/// A single step: lower ground z = 0 for x < 0, upper surface z = step_height
/// for x >= 0. The robot approaches along +x.
struct StepScenario {
  double step_height = 0.08;
  double track_height_h = 0.08;
  /// Rolling distance before the front tracks first touch the step.
  double approach_distance = 0.1;
  double rolling_speed = 0.6;

  double ground_height(double x) const { return x >= 0.0 ? step_height : 0.0; }
  void validate() const;
};

/// Planar body pose: position of the body origin and nose-up pitch.
struct BodyPose {
  double x = 0.0;
  double z = 0.0;
  double pitch = 0.0;

  Eigen::Matrix3d rotation() const;
  Vec3 position() const { return Vec3(x, 0.0, z); }
};

struct RobotState {
  BodyPose body;
  std::array<JointVector, kLegCount> q = zeros_per_leg<JointVector>();
  std::array<bool, kLegCount> contact{true, true, true, true};
  double time = 0.0;

  const JointVector& joints(LegId id) const { return q[leg_index(id)]; }
  JointVector& joints(LegId id) { return q[leg_index(id)]; }
  int contact_count() const;
};

Vec3 body_to_world(const BodyPose& pose, const Vec3& p_body);
Vec3 world_to_body(const BodyPose& pose, const Vec3& p_world);
/// Body-frame point to the shoulder frame of `leg`.
Vec3 body_to_shoulder(const LegChain& leg, const Vec3& p_body);

Vec3 tip_world(const RobotModel& model, const RobotState& state, LegId id);
Vec3 center_of_mass(const RobotModel& model, const RobotState& state);

/// Home posture on flat ground at `body_x`, tips at track-radius height above
/// `ground_z`.
RobotState home_state(const RobotModel& model, double body_x, double ground_z = 0.0);

/// Body-origin height above the ground plane in the level home posture.
double home_body_height(const RobotModel& model);

}  // namespace stepsim
