#include "stepsim/state.hpp"

#include <cmath>
#include <stdexcept>

namespace stepsim {

void StepScenario::validate() const {
  if (!(std::isfinite(step_height) && step_height > 0.0)) {
    throw std::invalid_argument("step_height_m must be > 0");
  }
  if (!(std::isfinite(track_height_h) && track_height_h > 0.0)) {
    throw std::invalid_argument("track_height_h_m must be > 0");
  }
  if (!(std::isfinite(approach_distance) && approach_distance >= 0.0)) {
    throw std::invalid_argument("approach_distance_m must be >= 0");
  }
  if (!(std::isfinite(rolling_speed) && rolling_speed > 0.0)) {
    throw std::invalid_argument("rolling_speed_mps must be > 0");
  }
}

Eigen::Matrix3d BodyPose::rotation() const {
  // Nose-up pitch lifts +x toward +z.
  return Eigen::AngleAxisd(-pitch, Vec3::UnitY()).toRotationMatrix();
}

int RobotState::contact_count() const {
  int n = 0;
  for (bool c : contact) n += c ? 1 : 0;
  return n;
}

Vec3 body_to_world(const BodyPose& pose, const Vec3& p_body) {
  return pose.position() + pose.rotation() * p_body;
}

Vec3 world_to_body(const BodyPose& pose, const Vec3& p_world) {
  return pose.rotation().transpose() * (p_world - pose.position());
}

Vec3 body_to_shoulder(const LegChain& leg, const Vec3& p_body) {
  const Eigen::Matrix3d r = leg.mount.block<3, 3>(0, 0);
  return r.transpose() * (p_body - leg.mount.block<3, 1>(0, 3));
}

Vec3 tip_world(const RobotModel& model, const RobotState& state, LegId id) {
  return body_to_world(state.body, tip_in_body(model.leg(id), state.joints(id)));
}

Vec3 center_of_mass(const RobotModel& model, const RobotState& state) {
  Vec3 weighted = model.body_mass() * body_to_world(state.body, model.mass.body_com);
  double total = model.body_mass();
  for (LegId id : kAllLegs) {
    const LegChain& leg = model.leg(id);
    for (int i = 0; i < kJointsPerLeg; ++i) {
      const double m = model.link_mass(i);
      if (m <= 0.0) continue;
      const Vec3 mid = point_position(leg, state.joints(id), i, Vec3(-0.5 * leg.links[i].a, 0.0, 0.0));
      const Vec3 body_p = (leg.mount * mid.homogeneous()).head<3>();
      weighted += m * body_to_world(state.body, body_p);
      total += m;
    }
  }
  return weighted / total;
}

double home_body_height(const RobotModel& model) {
  const LegChain& leg = model.leg(LegId::kFrontLeft);
  return model.track.radius() - tip_in_body(leg, leg.home()).z();
}

RobotState home_state(const RobotModel& model, double body_x, double ground_z) {
  RobotState s;
  s.body = BodyPose{body_x, ground_z + home_body_height(model), 0.0};
  for (LegId id : kAllLegs) s.joints(id) = model.leg(id).home();
  return s;
}

}  // namespace stepsim
