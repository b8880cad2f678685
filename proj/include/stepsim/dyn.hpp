#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include "stepsim/model.hpp"
#include "stepsim/state.hpp"

namespace stepsim {

// ---------------------------------------------------------------------------
// DC-motor energy model
// ---------------------------------------------------------------------------

/// Power drawn by one actuator at one instant. Mechanical power is clamped at
/// zero: a back-driven motor cannot store the energy.
struct EnergyEntry {
  double torque = 0.0;      // N*m
  double velocity = 0.0;    // rad/s
  double current = 0.0;     // A
  double mechanical = 0.0;  // W, >= 0
  double heat = 0.0;        // W, >= 0

  double total() const { return mechanical + heat; }
};

using EnergySample = std::array<EnergyEntry, kActuatorCount>;

EnergyEntry motor_power(double torque, double velocity, const MotorParams& motor);

/// Sum of mechanical + heat power over `subset`.
double sample_power(const EnergySample& sample, std::span<const int> subset);

/// Rectangular-rule integral of the summed power over `subset`.
double integrate_energy(std::span<const EnergySample> series, double dt, std::span<const int> subset);

/// Online accumulators. E_RW and E_Rr start at the negotiation origin; E_total
/// runs from the start of the simulation.
struct EnergyLedger {
  double whole = 0.0;  // E_RW
  double rear = 0.0;   // E_Rr
  double total = 0.0;
  double dt = 0.002;
  bool armed = false;

  void accumulate(const EnergySample& sample);
};

// ---------------------------------------------------------------------------
// Quasi-static support and joint torques
// ---------------------------------------------------------------------------

class SupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SupportState {
  std::vector<Vec3> contacts;  // world positions, only x and y matter
  Vec3 com = Vec3::Zero();
  double weight = 0.0;  // N
};

/// Non-negative vertical contact forces that sum to the weight, balance the
/// moments about the COM, and have minimum Euclidean norm among all such
/// distributions. Throws SupportError with fewer than three contacts or when
/// the COM projection leaves the support polygon.
std::vector<double> support_forces(const SupportState& support);

/// Signed distance of the COM projection to the support polygon boundary,
/// positive inside. Throws SupportError with fewer than three contacts.
double polygon_margin(const std::vector<Vec3>& contacts, const Vec3& com);

/// Leg joint torques holding `state` against the environment forces acting
/// on the tips (world frame; zero for legs without contact) and gravity on
/// the links.
std::array<JointVector, kLegCount> joint_torques(const RobotModel& model, const RobotState& state,
                                                 const std::array<Vec3, kLegCount>& tip_forces);

// ---------------------------------------------------------------------------
// Rolling on tracks
// ---------------------------------------------------------------------------

/// Geometry of one track pair against the step edge.
struct EdgeContact {
  double lift = 0.0;   // rise of the track above the lower ground, m
  double angle = 0.0;  // edge-normal angle from vertical, rad
  bool touching = false;
  bool blocked = false;  // step at or above the climb radius
};

/// Track pair at world x (tip) against a step at x = 0 of height `step`,
/// treating the track as a circle of radius `radius`.
EdgeContact edge_contact(double x, double step, double radius);

/// Horizontal distance before the edge at which a climb begins.
double climb_start_distance(double step, double radius);

struct RollingPose {
  BodyPose body;
  double front_x = 0.0;
  double rear_x = 0.0;
  EdgeContact front;
  EdgeContact rear;
};

/// Home-posture pose with the rear track tips at world x `rear_x`.
RollingPose rolling_pose(const RobotModel& model, const StepScenario& scenario, double rear_x);

/// Longitudinal distance between the front and rear track tips at home.
double wheelbase(const RobotModel& model);

struct RollingDrive {
  RollingPose pose;
  RobotState state;
  std::array<double, kLegCount> normal{};       // contact normal force per track, N
  std::array<Vec3, kLegCount> tip_force = zeros_per_leg<Vec3>();   // environment force on each tip, world
  std::array<double, kLegCount> track_torque{}; // drive torque per track, N*m
  double utilized_friction = 0.0;               // traction / normal, incl. rolling resistance
  double climb_force = 0.0;                     // net tangential force carried by the tracks, N
  bool feasible = true;
};

/// Quasi-static drive requirement with the rear tips at `rear_x` and the
/// robot moving in `direction` (+1 forward, -1 backward).
RollingDrive rolling_drive(const RobotModel& model, const StepScenario& scenario, double rear_x,
                           int direction = 1);

/// Actuator powers while rolling at `speed` (m/s, signed) in `drive`.
EnergySample rolling_energy(const RobotModel& model, const RollingDrive& drive, double speed);

}  // namespace stepsim
