#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stepsim/dyn.hpp"
#include "stepsim/gait.hpp"
#include "stepsim/model.hpp"
#include "stepsim/state.hpp"

namespace stepsim {

struct Thresholds {
  double height = 0.0;  // m
  double whole = 0.0;   // T_wb = E_Cw, J
  double rear = 0.0;    // T_rb = E_Cr, J

  void validate() const;
  bool operator==(const Thresholds&) const = default;
};

/// Pre-studied climbing energies keyed by step height, interpolated linearly.
class ThresholdTable {
 public:
  ThresholdTable() = default;
  explicit ThresholdTable(std::vector<Thresholds> rows);

  const std::vector<Thresholds>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  bool covers(double height) const;
  double min_height() const;
  double max_height() const;

  bool operator==(const ThresholdTable&) const = default;

 private:
  std::vector<Thresholds> rows_;
};

/// Exact row at a key, linear interpolation between keys. Throws
/// std::out_of_range outside the table.
Thresholds lookup_thresholds(const ThresholdTable& table, double height);

/// Thresholds that never trigger (rolling-only baseline).
Thresholds unreachable_thresholds(double height);

enum class Mode { kRolling, kPreparingTransition, kWalkingCycle, kRollingResumed, kCompleted, kFailed };
const char* mode_name(Mode mode);

/// Whether the controller graph allows `from` -> `to`.
bool transition_allowed(Mode from, Mode to);

struct ControllerState {
  Mode mode = Mode::kRolling;
  std::optional<GaitKind> gait;  // set from PreparingTransition on
  std::string failure;
  EnergyLedger ledger;
};

/// Gait selected by the ledgers, if any threshold is exceeded. The
/// whole-body test runs first.
std::optional<GaitKind> threshold_crossing(const EnergyLedger& ledger, const Thresholds& thresholds);

/// One rolling tick: meters `sample`, then moves to PreparingTransition if a
/// threshold is exceeded. Only Rolling can transition; RollingResumed keeps
/// rolling without re-arming.
ControllerState decision_step(const ControllerState& state, const Thresholds& thresholds,
                              const EnergySample& sample);

/// Backward roll before a walking excursion.
struct PreparationPlan {
  double start_rear_x = 0.0;
  double end_rear_x = 0.0;
  int ticks = 0;
  double speed = 0.0;  // signed, m/s
};

/// Plans the backward roll of the configured preparation distance from the
/// rear tip position `rear_x`.
PreparationPlan preparation_phase(const RobotModel& model, const StepScenario& scenario, double rear_x);

enum class Outcome { kCompletedRolling, kCompletedHybrid, kFailed };
const char* outcome_name(Outcome outcome);

struct ModeSpan {
  Mode mode;
  long first_tick = 0;
  long last_tick = 0;
};

struct CurvePoint {
  long tick = 0;
  double time = 0.0;
  Mode mode = Mode::kRolling;
  double whole = 0.0;  // E_RW
  double rear = 0.0;   // E_Rr
  double total = 0.0;
  double power = 0.0;  // all actuators, W
  BodyPose body;
};

struct NegotiationResult {
  Outcome outcome = Outcome::kFailed;
  std::string failure;
  Thresholds thresholds;
  std::vector<ModeSpan> timeline;
  // Every mode entered, in order. Unlike the timeline this includes modes
  // that lasted no ticks, such as a resumed roll that is already done.
  std::vector<Mode> path;
  std::vector<CurvePoint> curves;
  double total_energy = 0.0;
  double total_time = 0.0;
  std::optional<long> transition_tick;
  std::optional<GaitKind> gait;
  double min_margin = 0.0;      // over walking samples, 0 if none
  int max_airborne_legs = 0;    // over walking samples

  int transitions() const { return transition_tick ? 1 : 0; }
};

/// Rear tip x at the start of a run: the front tips `approach_distance`
/// short of the point where the tracks meet the edge.
double start_rear_x(const RobotModel& model, const StepScenario& scenario);

NegotiationResult run_negotiation(const StepScenario& scenario, const RobotModel& model,
                                  const Thresholds& thresholds);
NegotiationResult run_negotiation(const StepScenario& scenario, const RobotModel& model,
                                  const ThresholdTable& table);
NegotiationResult run_baseline(const StepScenario& scenario, const RobotModel& model);

struct PrestudyResult {
  ThresholdTable table;
  std::vector<std::string> warnings;
};

/// Climbing energies of both gaits from their standard entry stances.
/// Both meter every actuator over the whole gait cycle.
Thresholds prestudy_height(const RobotModel& model, double height);
PrestudyResult prestudy(const RobotModel& model, const std::vector<double>& heights);

/// Scenario for a step of `height` with the model's defaults.
StepScenario scenario_for(const RobotModel& model, double height);

}  // namespace stepsim
