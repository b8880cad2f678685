#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepsim/dyn.hpp"
#include "stepsim/model.hpp"
#include "stepsim/state.hpp"

namespace stepsim {

enum class GaitKind { kWholeBody, kRearBody };
const char* gait_name(GaitKind kind);

class PlanningError : public std::runtime_error {
 public:
  PlanningError(std::string phase, const std::string& what);
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

class ExecutionError : public std::runtime_error {
 public:
  ExecutionError(int phase_index, int sample_index, const std::string& what);
  int phase_index() const { return phase_index_; }
  int sample_index() const { return sample_index_; }

 private:
  int phase_index_;
  int sample_index_;
};

struct GaitPhase {
  enum class Kind { kBodyShiftForward, kBodyShiftBackward, kLegSwing, kSettle };

  Kind kind = Kind::kSettle;
  std::optional<LegId> leg;  // swing phases only
  BodyPose body_target;
  std::array<Vec3, kLegCount> tips_target = zeros_per_leg<Vec3>();  // world, end of phase
  double apex_height = 0.0;                   // swing apex (tip z), swings only
  /// Rest-to-rest sub-segments; one for shifts, lift/transfer/descend for
  /// swings. Each is an integer number of control ticks.
  std::vector<double> segment_durations;
  std::string label;

  double duration() const;
};

const char* phase_kind_name(GaitPhase::Kind kind);

struct GaitPlan {
  GaitKind kind = GaitKind::kWholeBody;
  double step_height = 0.0;
  RobotState start;
  std::vector<GaitPhase> phases;

  double duration() const;
};

/// Home joint angles of the four legs (the rolling posture).
std::array<JointVector, kLegCount> home_configuration(const RobotModel& model);

/// Distance of the landing tip from the step edge (x = 0).
double foothold_x(const RobotModel& model);

/// Entry stance of the whole-body gait: level home posture with the front
/// tips one stride short of their foothold on the step.
RobotState whole_body_entry(const RobotModel& model, const StepScenario& scenario);

/// Entry stance of the rear-body gait: rolled onto the step with the rear
/// tracks backed off the edge by the preparation distance.
RobotState rear_body_entry(const RobotModel& model, const StepScenario& scenario);

GaitPlan plan_whole_body_climb(const StepScenario& scenario, const RobotModel& model);
/// Whole-body plan from a level entry with all tracks on the lower ground;
/// the tracks first carry the robot to the standard entry stance.
GaitPlan plan_whole_body_climb(const StepScenario& scenario, const RobotModel& model,
                               const RobotState& entry);
GaitPlan plan_rear_body_climb(const StepScenario& scenario, const RobotModel& model);
/// Rear-body plan from an explicit entry state (front tracks on the step).
GaitPlan plan_rear_body_climb(const StepScenario& scenario, const RobotModel& model,
                              const RobotState& entry);

/// Signed distance of the COM projection to the support polygon of the
/// tips in contact, positive inside. Throws SupportError with < 3 supports.
double stability_margin(const RobotModel& model, const RobotState& state);

/// Distance from a track tip centre to the terrain (lower ground, step face,
/// upper surface). A tip resting on the ground sits at the track radius.
double terrain_distance(const StepScenario& scenario, const Vec3& tip);

struct GaitSample {
  RobotState state;
  std::array<JointVector, kLegCount> torque = zeros_per_leg<JointVector>();
  std::array<JointVector, kLegCount> velocity = zeros_per_leg<JointVector>();
  EnergySample energy;
  double margin = 0.0;
  int phase_index = 0;
};

/// Samples every phase at model.dt. The state must match the plan's entry
/// configuration (body pose within 1e-9 m).
std::vector<GaitSample> execute_gait(const GaitPlan& plan, const RobotModel& model,
                                     const StepScenario& scenario, const RobotState& state);

}  // namespace stepsim
