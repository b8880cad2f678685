#pragma once

#include <array>
#include <string>
#include <vector>

#include "stepsim/kin.hpp"

namespace stepsim {

struct MotorParams {
  double torque_constant = 0.5;  // K_t, N*m/A
  double resistance = 1.0;       // R_a, ohm

  void validate() const;
};

struct TrackParams {
  /// Track height h; the sprocket/track-end radius is h/2.
  double height = 0.08;
  /// Radius of the circular contact the track presents to a step edge.
  double edge_climb_radius = 0.30;
  double friction = 0.6;
  double rolling_resistance = 0.05;

  double radius() const { return 0.5 * height; }
  void validate() const;
};

struct MassParams {
  double total_mass = 20.0;
  /// Share of the total mass carried by the legs (uniform linear density
  /// along each link's a-length); the rest sits at `body_com` in the body
  /// frame.
  double leg_fraction = 0.3;
  double gravity = 9.81;
  Vec3 body_com = Vec3::Zero();

  void validate() const;
};

struct GaitParams {
  double clearance = 0.02;
  double backward_shift = 0.05;
  double min_margin = 0.01;
  double stride_length = 0.16;
  /// Distance from the step edge to the track end after landing on the step.
  double foothold_inset = 0.04;
  double peak_accel = 1.0;
  double min_phase_duration = 0.1;
  /// Track surface speed used when the tracks translate the robot in walking.
  double track_speed = 0.1;
  double preparation_distance = 0.05;
  /// Rolling distance past the edge (rear track end) that ends a negotiation.
  double completion_distance = 0.10;
  std::array<LegId, kLegCount> swing_order = {LegId::kFrontLeft, LegId::kFrontRight,
                                              LegId::kRearLeft, LegId::kRearRight};

  void validate() const;
};

/// Physical index of one actuator: 4 leg joints then the track drive.
inline constexpr int kActuatorsPerLeg = kJointsPerLeg + 1;
inline constexpr int kActuatorCount = kLegCount * kActuatorsPerLeg;
inline int actuator_index(LegId leg, int joint) { return leg_index(leg) * kActuatorsPerLeg + joint; }
inline int track_actuator(LegId leg) { return actuator_index(leg, kJointsPerLeg); }

struct RobotModel {
  std::array<LegChain, kLegCount> legs;
  MotorParams leg_motor;
  MotorParams track_motor;
  TrackParams track;
  MassParams mass;
  GaitParams gait;
  double dt = 0.002;

  const LegChain& leg(LegId id) const { return legs[leg_index(id)]; }
  double weight() const { return mass.total_mass * mass.gravity; }
  double body_mass() const { return mass.total_mass * (1.0 - mass.leg_fraction); }
  /// Mass of link `i` of one leg.
  double link_mass(int i) const;
  const MotorParams& motor_for(int actuator) const {
    return actuator % kActuatorsPerLeg == kJointsPerLeg ? track_motor : leg_motor;
  }

  void validate() const;
};

/// The reference robot: published front-left D-H table, mirrored legs,
/// calibrated contact parameters.
RobotModel reference_model();

/// Actuator subsets used by the energy ledgers.
std::vector<int> all_actuators();
std::vector<int> rear_actuators();

}  // namespace stepsim
