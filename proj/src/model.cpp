#include "stepsim/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace stepsim {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool finite_all(std::initializer_list<double> vs) {
  for (double v : vs) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

void MotorParams::validate() const {
  require(finite_all({torque_constant, resistance}), "motor parameters must be finite");
  require(torque_constant > 0.0, "torque_constant_nm_per_a must be > 0");
  require(resistance >= 0.0, "resistance_ohm must be >= 0");
}

void TrackParams::validate() const {
  require(finite_all({height, edge_climb_radius, friction, rolling_resistance}),
          "track parameters must be finite");
  require(height > 0.0, "track_height_m must be > 0");
  require(edge_climb_radius > 0.0, "edge_climb_radius_m must be > 0");
  require(friction > 0.0, "friction_mu must be > 0");
  require(rolling_resistance >= 0.0, "rolling_resistance must be >= 0");
}

void MassParams::validate() const {
  require(finite_all({total_mass, leg_fraction, gravity, body_com.x(), body_com.y(), body_com.z()}),
          "mass parameters must be finite");
  require(total_mass > 0.0, "total_mass_kg must be > 0");
  require(leg_fraction >= 0.0 && leg_fraction < 1.0, "leg_mass_fraction must be in [0, 1)");
  require(gravity > 0.0, "gravity_mps2 must be > 0");
}

void GaitParams::validate() const {
  require(finite_all({clearance, backward_shift, min_margin, stride_length, foothold_inset, peak_accel,
                      min_phase_duration, track_speed, preparation_distance, completion_distance}),
          "gait parameters must be finite");
  require(clearance >= 0.0, "clearance_m must be >= 0");
  require(backward_shift >= 0.0, "backward_shift_m must be >= 0");
  require(min_margin >= 0.0, "min_margin_m must be >= 0");
  require(stride_length > 0.0, "stride_length_m must be > 0");
  require(foothold_inset >= 0.0, "foothold_inset_m must be >= 0");
  require(peak_accel > 0.0, "peak_accel_radps2 must be > 0");
  require(min_phase_duration > 0.0, "min_phase_duration_s must be > 0");
  require(track_speed > 0.0, "track_speed_mps must be > 0");
  require(preparation_distance >= 0.0, "preparation_distance_m must be >= 0");
  require(completion_distance >= 0.0, "completion_distance_m must be >= 0");
  std::set<LegId> seen(swing_order.begin(), swing_order.end());
  require(seen.size() == kLegCount, "swing_order must name each leg once");
  require(is_front(swing_order[0]) && is_front(swing_order[1]),
          "swing_order must list the front legs first");
}

double RobotModel::link_mass(int i) const {
  double total_length = 0.0;
  for (const auto& l : legs[0].links) total_length += std::abs(l.a);
  if (total_length <= 0.0) return 0.0;
  const double per_leg = mass.total_mass * mass.leg_fraction / kLegCount;
  return per_leg * std::abs(legs[0].links[i].a) / total_length;
}

void RobotModel::validate() const {
  for (LegId id : kAllLegs) {
    const auto& l = legs[leg_index(id)];
    require(l.side == id, std::string("leg entry ") + leg_name(id) + " carries the wrong side tag");
    l.validate();
  }
  leg_motor.validate();
  track_motor.validate();
  track.validate();
  mass.validate();
  gait.validate();
  require(std::isfinite(dt) && dt > 0.0, "dt_s must be > 0");
}

RobotModel reference_model() {
  RobotModel m;
  // Distal segment horizontal at home so the track lies on the ground.
  const JointVector home(0.0, 1.2, 0.9, -2.1);
  LegChain fl = front_left_reference(home);
  fl.mount.block<3, 1>(0, 3) = Vec3(0.25, 0.10, 0.0);
  for (LegId id : kAllLegs) m.legs[leg_index(id)] = mirror_leg(fl, id);

  // Calibrated so the reference runs reproduce the h/2h/3h/4h outcomes.
  m.leg_motor = {0.8, 1e-4};
  m.track_motor = {0.1025, 1.0};
  m.track.edge_climb_radius = 0.34;
  m.track.friction = 1.0;
  m.mass.body_com = Vec3(-0.02, 0.0, 0.0);
  m.gait.peak_accel = 3.0;
  m.gait.completion_distance = 0.05;
  return m;
}

std::vector<int> all_actuators() {
  std::vector<int> out(kActuatorCount);
  for (int i = 0; i < kActuatorCount; ++i) out[i] = i;
  return out;
}

std::vector<int> rear_actuators() {
  std::vector<int> out;
  for (LegId id : {LegId::kRearLeft, LegId::kRearRight}) {
    for (int j = 0; j < kActuatorsPerLeg; ++j) out.push_back(actuator_index(id, j));
  }
  return out;
}

}  // namespace stepsim
