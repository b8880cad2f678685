#include "stepsim/ctrl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stepsim {

namespace {

constexpr double kHeightTolerance = 1e-9;
constexpr long kMaxTicks = 5'000'000;

}  // namespace

void Thresholds::validate() const {
  if (!(std::isfinite(height) && height > 0.0)) throw std::invalid_argument("threshold height_m must be > 0");
  if (!(std::isfinite(whole) && whole > 0.0)) throw std::invalid_argument("E_Cw_J must be > 0");
  if (!(std::isfinite(rear) && rear > 0.0)) throw std::invalid_argument("E_Cr_J must be > 0");
  if (rear > whole) throw std::invalid_argument("E_Cr_J must not exceed E_Cw_J at the same height");
}

ThresholdTable::ThresholdTable(std::vector<Thresholds> rows) : rows_(std::move(rows)) {
  for (size_t i = 0; i < rows_.size(); ++i) {
    rows_[i].validate();
    if (i > 0 && !(rows_[i].height > rows_[i - 1].height)) {
      throw std::invalid_argument("threshold table heights must be strictly increasing");
    }
  }
}

double ThresholdTable::min_height() const {
  if (rows_.empty()) throw std::out_of_range("threshold table is empty");
  return rows_.front().height;
}

double ThresholdTable::max_height() const {
  if (rows_.empty()) throw std::out_of_range("threshold table is empty");
  return rows_.back().height;
}

bool ThresholdTable::covers(double height) const {
  return !rows_.empty() && height >= min_height() - kHeightTolerance && height <= max_height() + kHeightTolerance;
}

Thresholds lookup_thresholds(const ThresholdTable& table, double height) {
  if (!table.covers(height)) {
    std::ostringstream os;
    os << "step height " << height << " m is outside the threshold table";
    if (!table.empty()) os << " range [" << table.min_height() << ", " << table.max_height() << "] m";
    throw std::out_of_range(os.str());
  }
  const auto& rows = table.rows();
  for (const auto& r : rows) {
    if (std::abs(r.height - height) <= kHeightTolerance) return r;
  }
  const auto hi = std::upper_bound(rows.begin(), rows.end(), height,
                                   [](double h, const Thresholds& r) { return h < r.height; });
  const auto lo = hi - 1;
  const double u = (height - lo->height) / (hi->height - lo->height);
  Thresholds out;
  out.height = height;
  out.whole = lo->whole + u * (hi->whole - lo->whole);
  out.rear = lo->rear + u * (hi->rear - lo->rear);
  return out;
}

Thresholds unreachable_thresholds(double height) {
  const double inf = std::numeric_limits<double>::infinity();
  return Thresholds{height, inf, inf};
}

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::kRolling: return "rolling";
    case Mode::kPreparingTransition: return "preparing";
    case Mode::kWalkingCycle: return "walking";
    case Mode::kRollingResumed: return "rolling-resumed";
    case Mode::kCompleted: return "completed";
    case Mode::kFailed: return "failed";
  }
  return "?";
}

bool transition_allowed(Mode from, Mode to) {
  if (from == to) return true;
  if (to == Mode::kFailed) return from != Mode::kCompleted;
  switch (from) {
    case Mode::kRolling: return to == Mode::kPreparingTransition || to == Mode::kCompleted;
    case Mode::kPreparingTransition: return to == Mode::kWalkingCycle;
    case Mode::kWalkingCycle: return to == Mode::kRollingResumed;
    case Mode::kRollingResumed: return to == Mode::kCompleted;
    default: return false;
  }
}

std::optional<GaitKind> threshold_crossing(const EnergyLedger& ledger, const Thresholds& thresholds) {
  if (ledger.whole > thresholds.whole) return GaitKind::kWholeBody;
  if (ledger.rear > thresholds.rear) return GaitKind::kRearBody;
  return std::nullopt;
}

ControllerState decision_step(const ControllerState& state, const Thresholds& thresholds,
                              const EnergySample& sample) {
  if (state.mode != Mode::kRolling && state.mode != Mode::kRollingResumed) {
    throw std::logic_error(std::string("decision_step called in mode ") + mode_name(state.mode));
  }
  ControllerState next = state;
  next.ledger.accumulate(sample);
  if (next.mode == Mode::kRolling) {
    if (auto gait = threshold_crossing(next.ledger, thresholds)) {
      next.mode = Mode::kPreparingTransition;
      next.gait = gait;
    }
  }
  return next;
}

PreparationPlan preparation_phase(const RobotModel& model, const StepScenario& scenario, double rear_x) {
  const double step = scenario.rolling_speed * model.dt;
  PreparationPlan p;
  p.start_rear_x = rear_x;
  p.ticks = static_cast<int>(std::lround(model.gait.preparation_distance / step));
  p.end_rear_x = rear_x - p.ticks * step;
  p.speed = -scenario.rolling_speed;
  return p;
}

const char* outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::kCompletedRolling: return "completed-rolling";
    case Outcome::kCompletedHybrid: return "completed-hybrid";
    case Outcome::kFailed: return "failed";
  }
  return "?";
}

double start_rear_x(const RobotModel& model, const StepScenario& scenario) {
  const double d = climb_start_distance(scenario.step_height, model.track.edge_climb_radius);
  return -d - scenario.approach_distance - wheelbase(model);
}

StepScenario scenario_for(const RobotModel& model, double height) {
  StepScenario s;
  s.step_height = height;
  s.track_height_h = model.track.height;
  return s;
}

namespace {

class Negotiation {
 public:
  Negotiation(const StepScenario& scenario, const RobotModel& model, const Thresholds& thresholds)
      : scenario_(scenario), model_(model), thresholds_(thresholds) {
    state_.ledger.dt = model.dt;
    result_.thresholds = thresholds;
    result_.path.push_back(state_.mode);
  }

  NegotiationResult run() {
    try {
      double rear_x = start_rear_x(model_, scenario_);
      if (!roll(rear_x)) return finish();
      const GaitKind gait = *state_.gait;
      result_.gait = gait;
      rear_x = prepare(rear_x);
      if (state_.mode == Mode::kFailed) return finish();
      rear_x = walk(gait, rear_x);
      if (state_.mode == Mode::kFailed) return finish();
      set_mode(Mode::kRollingResumed);
      roll(rear_x);
    } catch (const std::exception& e) {
      fail(e.what());
    }
    return finish();
  }

 private:
  // Rolls forward from rear tip `rear_x`; returns true when a transition is
  // requested, leaving `rear_x` at the stop position.
  bool roll(double& rear_x) {
    const double step = scenario_.rolling_speed * model_.dt;
    const double origin = rear_x;
    for (long n = 0;; ++n) {
      const double x = origin + n * step;
      if (x >= model_.gait.completion_distance - 1e-12) {
        rear_x = x;
        set_mode(Mode::kCompleted);
        return false;
      }
      if (tick_ >= kMaxTicks) {
        fail("tick budget exhausted");
        return false;
      }
      const RollingDrive drive = rolling_drive(model_, scenario_, x, 1);
      if (!drive.feasible) {
        std::ostringstream os;
        os << "rolling infeasible at rear x " << x << " m: ";
        if (drive.pose.front.blocked || drive.pose.rear.blocked) {
          os << "step edge blocks the track";
        } else {
          os << "utilized friction " << drive.utilized_friction << " exceeds " << model_.track.friction;
        }
        fail(os.str());
        return false;
      }
      if (!state_.ledger.armed && drive.pose.front.touching) state_.ledger.armed = true;
      const EnergySample e = rolling_energy(model_, drive, scenario_.rolling_speed);
      state_ = decision_step(state_, thresholds_, e);
      record(drive.pose.body, e);
      if (state_.mode == Mode::kPreparingTransition) {
        result_.transition_tick = tick_;
        set_mode(Mode::kPreparingTransition);
        rear_x = x + step;
        return true;
      }
    }
  }

  double prepare(double rear_x) {
    const PreparationPlan plan = preparation_phase(model_, scenario_, rear_x);
    const double step = scenario_.rolling_speed * model_.dt;
    for (int k = 0; k < plan.ticks; ++k) {
      const double x = plan.start_rear_x - k * step;
      const RollingDrive drive = rolling_drive(model_, scenario_, x, -1);
      if (!drive.feasible) {
        std::ostringstream os;
        os << "backward roll blocked at rear x " << x << " m";
        fail(os.str());
        return x;
      }
      const EnergySample e = rolling_energy(model_, drive, plan.speed);
      state_.ledger.accumulate(e);
      record(drive.pose.body, e);
    }
    const EdgeContact rear = edge_contact(plan.end_rear_x, scenario_.step_height, model_.track.edge_climb_radius);
    if (rear.touching && rear.lift > 0.0) {
      std::ostringstream os;
      os << "rear tracks still on the step edge after the preparation roll (lift " << rear.lift << " m)";
      fail(os.str());
    }
    return plan.end_rear_x;
  }

  double walk(GaitKind gait, double rear_x) {
    set_mode(Mode::kWalkingCycle);
    const RollingPose pose = rolling_pose(model_, scenario_, rear_x);
    RobotState entry;
    entry.body = pose.body;
    entry.q = home_configuration(model_);
    const GaitPlan plan = gait == GaitKind::kRearBody ? plan_rear_body_climb(scenario_, model_, entry)
                                                      : plan_whole_body_climb(scenario_, model_, entry);
    const auto samples = execute_gait(plan, model_, scenario_, entry);
    result_.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
      state_.ledger.accumulate(s.energy);
      record(s.state.body, s.energy);
      result_.min_margin = std::min(result_.min_margin, s.margin);
      result_.max_airborne_legs = std::max(result_.max_airborne_legs, kLegCount - s.state.contact_count());
    }
    if (samples.empty()) return rear_x;
    return tip_world(model_, samples.back().state, LegId::kRearLeft).x();
  }

  void record(const BodyPose& body, const EnergySample& e) {
    ++tick_;
    CurvePoint p;
    p.tick = tick_;
    p.time = tick_ * model_.dt;
    p.mode = state_.mode;
    p.whole = state_.ledger.whole;
    p.rear = state_.ledger.rear;
    p.total = state_.ledger.total;
    p.power = sample_power(e, all_actuators());
    p.body = body;
    result_.curves.push_back(p);
    auto& tl = result_.timeline;
    if (tl.empty() || tl.back().mode != p.mode) {
      tl.push_back(ModeSpan{p.mode, tick_, tick_});
    } else {
      tl.back().last_tick = tick_;
    }
  }

  void set_mode(Mode mode) {
    if (!transition_allowed(state_.mode, mode)) {
      throw std::logic_error(std::string("illegal mode transition ") + mode_name(state_.mode) + " -> " +
                             mode_name(mode));
    }
    state_.mode = mode;
    enter(mode);
  }

  void enter(Mode mode) {
    if (result_.path.back() != mode) result_.path.push_back(mode);
  }

  void fail(const std::string& reason) {
    state_.mode = Mode::kFailed;
    state_.failure = reason;
    enter(Mode::kFailed);
  }

  NegotiationResult finish() {
    result_.total_energy = state_.ledger.total;
    result_.total_time = tick_ * model_.dt;
    if (state_.mode == Mode::kCompleted) {
      result_.outcome = result_.transition_tick ? Outcome::kCompletedHybrid : Outcome::kCompletedRolling;
    } else {
      result_.outcome = Outcome::kFailed;
      result_.failure = state_.failure.empty() ? "negotiation did not complete" : state_.failure;
    }
    if (!std::isfinite(result_.min_margin)) result_.min_margin = 0.0;
    return std::move(result_);
  }

  const StepScenario& scenario_;
  const RobotModel& model_;
  Thresholds thresholds_;
  ControllerState state_;
  NegotiationResult result_;
  long tick_ = 0;
};

}  // namespace

NegotiationResult run_negotiation(const StepScenario& scenario, const RobotModel& model,
                                  const Thresholds& thresholds) {
  scenario.validate();
  model.validate();
  return Negotiation(scenario, model, thresholds).run();
}

NegotiationResult run_negotiation(const StepScenario& scenario, const RobotModel& model,
                                  const ThresholdTable& table) {
  return run_negotiation(scenario, model, lookup_thresholds(table, scenario.step_height));
}

NegotiationResult run_baseline(const StepScenario& scenario, const RobotModel& model) {
  return run_negotiation(scenario, model, unreachable_thresholds(scenario.step_height));
}

Thresholds prestudy_height(const RobotModel& model, double height) {
  const StepScenario scenario = scenario_for(model, height);
  scenario.validate();
  Thresholds t;
  t.height = height;

  const GaitPlan whole = plan_whole_body_climb(scenario, model);
  std::vector<EnergySample> series;
  for (const auto& s : execute_gait(whole, model, scenario, whole.start)) series.push_back(s.energy);
  t.whole = integrate_energy(series, model.dt, all_actuators());

  const GaitPlan rear = plan_rear_body_climb(scenario, model);
  series.clear();
  for (const auto& s : execute_gait(rear, model, scenario, rear.start)) series.push_back(s.energy);
  t.rear = integrate_energy(series, model.dt, all_actuators());
  return t;
}

PrestudyResult prestudy(const RobotModel& model, const std::vector<double>& heights) {
  model.validate();
  std::vector<double> sorted = heights;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  PrestudyResult out;
  std::vector<Thresholds> rows;
  for (double h : sorted) {
    try {
      const Thresholds t = prestudy_height(model, h);
      t.validate();
      rows.push_back(t);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "height " << h << " m omitted: " << e.what();
      out.warnings.push_back(os.str());
    }
  }
  out.table = ThresholdTable(std::move(rows));
  return out;
}

}  // namespace stepsim
