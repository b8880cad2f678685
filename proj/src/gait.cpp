#include "stepsim/gait.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <limits>
#include <tuple>

#include "stepsim/traj.hpp"

namespace stepsim {

namespace {

struct Stance {
  BodyPose body;
  std::array<Vec3, kLegCount> tips = zeros_per_leg<Vec3>();
  std::array<JointVector, kLegCount> q;
};

Stance stance_from(const RobotModel& model, const RobotState& s) {
  Stance out;
  out.body = s.body;
  out.q = s.q;
  for (LegId id : kAllLegs) out.tips[leg_index(id)] = tip_world(model, s, id);
  return out;
}

JointVector solve_leg(const RobotModel& model, LegId id, const BodyPose& body, const Vec3& tip,
                      const JointVector& seed) {
  const LegChain& leg = model.leg(id);
  return inverse_kinematics(leg, body_to_shoulder(leg, world_to_body(body, tip)), seed);
}

std::array<JointVector, kLegCount> solve_all(const RobotModel& model, const BodyPose& body,
                                             const std::array<Vec3, kLegCount>& tips,
                                             const std::array<JointVector, kLegCount>& seeds,
                                             const std::string& label) {
  std::array<JointVector, kLegCount> q;
  for (LegId id : kAllLegs) {
    const int i = leg_index(id);
    try {
      q[i] = solve_leg(model, id, body, tips[i], seeds[i]);
    } catch (const KinematicsError& e) {
      throw PlanningError(label, std::string(leg_name(id)) + ": " + e.what());
    }
  }
  return q;
}

double max_joint_delta(const std::array<JointVector, kLegCount>& a, const std::array<JointVector, kLegCount>& b) {
  double m = 0.0;
  for (int i = 0; i < kLegCount; ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

double segment_time(const RobotModel& model, double joint_delta, double slide) {
  double t = duration_for_peak_accel(joint_delta, model.gait.peak_accel, model.gait.min_phase_duration);
  t = std::max(t, slide / model.gait.track_speed);
  const double ticks = std::ceil(t / model.dt - 1e-9);
  return ticks * model.dt;
}

double ground_under(const StepScenario& scenario, const Vec3& tip) {
  return scenario.ground_height(tip.x());
}

// Level body height splitting the ground height difference between the
// lowest and highest legs.
double level_body_z(const RobotModel& model, const StepScenario& scenario,
                    const std::array<Vec3, kLegCount>& tips) {
  double lo = ground_under(scenario, tips[0]), hi = lo;
  for (const auto& t : tips) {
    lo = std::min(lo, ground_under(scenario, t));
    hi = std::max(hi, ground_under(scenario, t));
  }
  return home_body_height(model) + 0.5 * (lo + hi);
}

double support_margin(const RobotModel& model, const BodyPose& body, const std::array<JointVector, kLegCount>& q,
                      const std::array<Vec3, kLegCount>& tips, std::optional<LegId> lifted) {
  RobotState s;
  s.body = body;
  s.q = q;
  std::vector<Vec3> support;
  for (LegId id : kAllLegs) {
    if (lifted && *lifted == id) continue;
    support.push_back(tips[leg_index(id)]);
  }
  return polygon_margin(support, center_of_mass(model, s));
}

// Steps through one phase at the control rate, calling
// visit(sample_index, previous, next) for every tick. Returns the final state.
template <class Visit>
RobotState trace_phase(const RobotModel& model, const GaitPhase& phase, int phase_index, const RobotState& start,
                       Visit&& visit) {
  const double dt = model.dt;
  RobotState cur = start;
  std::array<Vec3, kLegCount> start_tips;
  for (LegId id : kAllLegs) start_tips[leg_index(id)] = tip_world(model, cur, id);
  int sample_index = 0;

  auto solve = [&](LegId id, const BodyPose& body, const Vec3& tip, const JointVector& seed) {
    try {
      return solve_leg(model, id, body, tip, seed);
    } catch (const KinematicsError& e) {
      throw ExecutionError(phase_index, sample_index, std::string(leg_name(id)) + ": " + e.what());
    }
  };

  if (phase.kind != GaitPhase::Kind::kLegSwing) {
    const BodyPose b0 = cur.body;
    const double T = phase.segment_durations.at(0);
    const QuinticSegment s = rest_to_rest(0.0, 1.0, T);
    const int n = static_cast<int>(std::lround(T / dt));
    for (int k = 1; k <= n; ++k) {
      ++sample_index;
      const double u = k == n ? 1.0 : sample(s, k * dt).q;
      RobotState next = cur;
      next.time = cur.time + dt;
      next.body = BodyPose{b0.x + u * (phase.body_target.x - b0.x), b0.z + u * (phase.body_target.z - b0.z),
                           b0.pitch + u * (phase.body_target.pitch - b0.pitch)};
      for (LegId id : kAllLegs) {
        const int i = leg_index(id);
        next.q[i] = solve(id, next.body, start_tips[i] + u * (phase.tips_target[i] - start_tips[i]), cur.q[i]);
      }
      visit(sample_index, cur, next);
      cur = next;
    }
    return cur;
  }

  const LegId id = *phase.leg;
  const int li = leg_index(id);
  const Vec3 p0 = start_tips[li];
  const Vec3 p3 = phase.tips_target[li];
  const Vec3 pa(p0.x(), p0.y(), phase.apex_height);
  const Vec3 pb(p3.x(), p3.y(), phase.apex_height);
  const std::array<std::pair<Vec3, Vec3>, 3> path = {{{p0, pa}, {pa, pb}, {pb, p3}}};
  for (size_t seg = 0; seg < path.size(); ++seg) {
    const double T = phase.segment_durations.at(seg);
    const QuinticSegment s = rest_to_rest(0.0, 1.0, T);
    const int n = static_cast<int>(std::lround(T / dt));
    const auto& [from, to] = path[seg];
    for (int k = 1; k <= n; ++k) {
      ++sample_index;
      const double u = k == n ? 1.0 : sample(s, k * dt).q;
      RobotState next = cur;
      next.time = cur.time + dt;
      next.contact[li] = (seg == path.size() - 1 && k == n);
      next.q[li] = solve(id, next.body, from + u * (to - from), cur.q[li]);
      visit(sample_index, cur, next);
      cur = next;
    }
  }
  return cur;
}

class Planner {
 public:
  Planner(const RobotModel& model, const StepScenario& scenario, GaitPlan& plan)
      : model_(model), scenario_(scenario), plan_(plan), cur_(stance_from(model, plan.start)) {}

  // Body translation with the tips fixed or rolling on the tracks.
  void shift(GaitPhase::Kind kind, const BodyPose& target, const std::array<Vec3, kLegCount>& tips,
             const std::string& label) {
    std::string why;
    if (!try_shift(kind, target, tips, label, &why)) throw PlanningError(label, why);
  }

  std::array<Vec3, 3> swing_waypoints(const Vec3& p0, const Vec3& foothold) const {
    const double apex = std::max(scenario_.step_height, ground_under(scenario_, p0)) + model_.track.radius() +
                        model_.gait.clearance;
    const Vec3 pa(p0.x(), p0.y(), std::max(apex, p0.z()));
    return {pa, Vec3(foothold.x(), foothold.y(), pa.z()), foothold};
  }

  // Lowest margin over the lift-off and swing waypoints of `id`, or -inf if a
  // waypoint is out of reach.
  double swing_margin(const BodyPose& body, std::array<JointVector, kLegCount> q, std::array<Vec3, kLegCount> tips,
                      LegId id, const Vec3& foothold) const {
    const int i = leg_index(id);
    double m = support_margin(model_, body, q, tips, id);
    for (const Vec3& w : swing_waypoints(tips[i], foothold)) {
      try {
        q[i] = solve_leg(model_, id, body, w, q[i]);
      } catch (const KinematicsError&) {
        return -std::numeric_limits<double>::infinity();
      }
      tips[i] = w;
      m = std::min(m, support_margin(model_, body, q, tips, id));
    }
    return m;
  }

  void swing(LegId id, const Vec3& foothold, const std::string& label) {
    const int i = leg_index(id);
    const auto [pa, pb, pc] = swing_waypoints(cur_.tips[i], foothold);
    GaitPhase p;
    p.kind = GaitPhase::Kind::kLegSwing;
    p.leg = id;
    p.label = label;
    p.apex_height = pa.z();
    p.body_target = cur_.body;
    p.tips_target = cur_.tips;
    p.tips_target[i] = foothold;

    JointVector q = cur_.q[i];
    for (const Vec3& waypoint : {pa, pb, pc}) {
      JointVector next;
      try {
        next = solve_leg(model_, id, cur_.body, waypoint, q);
      } catch (const KinematicsError& e) {
        throw PlanningError(label, std::string(leg_name(id)) + ": " + e.what());
      }
      p.segment_durations.push_back(segment_time(model_, (next - q).cwiseAbs().maxCoeff(), 0.0));
      q = next;
    }
    std::string why;
    if (!commit(std::move(p), &why)) throw PlanningError(label, why);
  }

  // Support shift before lifting `lifted`: the smallest forward body offset
  // from `start_x`, and if the body alone cannot do it, the front tracks roll
  // back toward the body to pull the support triangle in. Front tips never
  // move behind the landing foothold.
  void support_shift(LegId lifted, double start_x, double z, const std::array<Vec3, kLegCount>& tips,
                     const std::string& label) {
    constexpr double kBodyStep = 0.002;
    constexpr double kMaxBody = 0.2;
    constexpr double kPullStep = 0.01;
    constexpr double kMaxPull = 0.4;
    const double front_min = foothold_x(model_);
    std::string why = "no body position keeps the COM inside the support of " + std::string(leg_name(lifted)) +
                      "'s swing";
    for (double pull = 0.0; pull <= kMaxPull + 1e-12; pull += kPullStep) {
      auto moved = tips;
      bool on_step = true;
      for (LegId id : {LegId::kFrontLeft, LegId::kFrontRight}) {
        Vec3& t = moved[leg_index(id)];
        t.x() -= pull;
        if (pull > 0.0 && t.x() < front_min) on_step = false;
      }
      if (!on_step) break;
      const Vec3 foothold(foothold_x(model_), moved[leg_index(lifted)].y(),
                          scenario_.step_height + model_.track.radius());
      for (double dx = 0.0; dx <= kMaxBody + 1e-12; dx += kBodyStep) {
        const BodyPose body{start_x + dx, z, 0.0};
        std::array<JointVector, kLegCount> q;
        try {
          q = solve_all(model_, body, moved, cur_.q, label);
        } catch (const PlanningError&) {
          continue;
        }
        if (swing_margin(body, q, moved, lifted, foothold) < model_.gait.min_margin) continue;
        if (try_shift(GaitPhase::Kind::kBodyShiftForward, body, moved, label, &why)) return;
      }
    }
    throw PlanningError(label, why);
  }

  const Stance& current() const { return cur_; }

 private:
  bool try_shift(GaitPhase::Kind kind, const BodyPose& target, const std::array<Vec3, kLegCount>& tips,
                 const std::string& label, std::string* why) {
    GaitPhase p;
    p.kind = kind;
    p.label = label;
    p.body_target = target;
    p.tips_target = tips;
    std::array<JointVector, kLegCount> q;
    try {
      q = solve_all(model_, target, tips, cur_.q, label);
    } catch (const PlanningError& e) {
      *why = e.what();
      return false;
    }
    double slide = 0.0;
    for (int i = 0; i < kLegCount; ++i) slide = std::max(slide, (tips[i] - cur_.tips[i]).norm());
    p.segment_durations = {segment_time(model_, max_joint_delta(cur_.q, q), slide)};
    return commit(std::move(p), why);
  }

  // Traces the phase exactly as execution will; accepts it only if every
  // sample is reachable and statically stable.
  bool commit(GaitPhase p, std::string* why) {
    RobotState s;
    s.body = cur_.body;
    s.q = cur_.q;
    const int index = static_cast<int>(plan_.phases.size());
    RobotState end;
    try {
      end = trace_phase(model_, p, index, s, [&](int sample_index, const RobotState&, const RobotState& next) {
        const double m = stability_margin(model_, next);
        if (m < 0.0) {
          std::ostringstream os;
          os << "static stability margin " << m << " m is negative";
          throw ExecutionError(index, sample_index, os.str());
        }
      });
    } catch (const ExecutionError& e) {
      *why = e.what();
      return false;
    } catch (const SupportError& e) {
      *why = e.what();
      return false;
    }
    cur_ = Stance{end.body, p.tips_target, end.q};
    plan_.phases.push_back(std::move(p));
    return true;
  }

  const RobotModel& model_;
  const StepScenario& scenario_;
  GaitPlan& plan_;
  Stance cur_;
};

Vec3 landing(const RobotModel& model, const StepScenario& scenario, const Vec3& from) {
  return Vec3(foothold_x(model), from.y(), scenario.step_height + model.track.radius());
}

// Rear swings with support shifts, then the resume posture. Shared by both
// gaits.
void plan_rear_portion(Planner& planner, const RobotModel& model, const StepScenario& scenario) {
  const auto& order = model.gait.swing_order;
  // The tracks carry the robot until the first rear tip sits one stride
  // short of its foothold.
  auto tips = planner.current().tips;
  const double travel = foothold_x(model) - model.gait.stride_length - tips[leg_index(order[2])].x();
  for (auto& t : tips) t.x() += travel;
  double z = level_body_z(model, scenario, tips);
  const double x_guess = planner.current().body.x + (tips[0].x() - planner.current().tips[0].x());
  planner.support_shift(order[2], x_guess, z, tips, "rear support shift 1");
  planner.swing(order[2], landing(model, scenario, tips[leg_index(order[2])]),
                std::string("swing ") + leg_name(order[2]));

  tips = planner.current().tips;
  z = level_body_z(model, scenario, tips);
  planner.support_shift(order[3], planner.current().body.x, z, tips, "rear support shift 2");
  planner.swing(order[3], landing(model, scenario, tips[leg_index(order[3])]),
                std::string("swing ") + leg_name(order[3]));

  // Resume the home posture over the rear footholds; the front tracks roll
  // forward to their home spacing.
  tips = planner.current().tips;
  const auto& rl = model.leg(LegId::kRearLeft);
  const Vec3 rear_home = tip_in_body(rl, rl.home());
  BodyPose home_body{tips[leg_index(LegId::kRearLeft)].x() - rear_home.x(),
                     scenario.step_height + home_body_height(model), 0.0};
  for (LegId id : kAllLegs) {
    const LegChain& leg = model.leg(id);
    const Vec3 target = body_to_world(home_body, tip_in_body(leg, leg.home()));
    tips[leg_index(id)].x() = target.x();
  }
  planner.shift(GaitPhase::Kind::kBodyShiftForward, home_body, tips, "resume posture");
}

}  // namespace

PlanningError::PlanningError(std::string phase, const std::string& what)
    : std::runtime_error(phase + ": " + what), phase_(std::move(phase)) {}

namespace {
std::string execution_message(int phase, int sample, const std::string& what) {
  std::ostringstream os;
  os << "phase " << phase << ", sample " << sample << ": " << what;
  return os.str();
}
}  // namespace

ExecutionError::ExecutionError(int phase_index, int sample_index, const std::string& what)
    : std::runtime_error(execution_message(phase_index, sample_index, what)),
      phase_index_(phase_index),
      sample_index_(sample_index) {}

const char* gait_name(GaitKind kind) {
  return kind == GaitKind::kWholeBody ? "whole-body" : "rear-body";
}

const char* phase_kind_name(GaitPhase::Kind kind) {
  switch (kind) {
    case GaitPhase::Kind::kBodyShiftForward: return "body-shift-forward";
    case GaitPhase::Kind::kBodyShiftBackward: return "body-shift-backward";
    case GaitPhase::Kind::kLegSwing: return "leg-swing";
    case GaitPhase::Kind::kSettle: return "settle";
  }
  return "?";
}

double GaitPhase::duration() const {
  double t = 0.0;
  for (double d : segment_durations) t += d;
  return t;
}

double GaitPlan::duration() const {
  double t = 0.0;
  for (const auto& p : phases) t += p.duration();
  return t;
}

std::array<JointVector, kLegCount> home_configuration(const RobotModel& model) {
  std::array<JointVector, kLegCount> q;
  for (LegId id : kAllLegs) q[leg_index(id)] = model.leg(id).home();
  return q;
}

double foothold_x(const RobotModel& model) {
  return model.track.radius() + model.gait.foothold_inset;
}

RobotState whole_body_entry(const RobotModel& model, const StepScenario& scenario) {
  (void)scenario;
  const auto& fl = model.leg(LegId::kFrontLeft);
  const double front_x = foothold_x(model) - model.gait.stride_length;
  return home_state(model, front_x - tip_in_body(fl, fl.home()).x());
}

RobotState rear_body_entry(const RobotModel& model, const StepScenario& scenario) {
  const double rear_x = -climb_start_distance(scenario.step_height, model.track.edge_climb_radius) -
                        model.gait.preparation_distance;
  const RollingPose pose = rolling_pose(model, scenario, rear_x);
  RobotState s;
  s.body = pose.body;
  s.q = home_configuration(model);
  return s;
}

GaitPlan plan_whole_body_climb(const StepScenario& scenario, const RobotModel& model) {
  return plan_whole_body_climb(scenario, model, whole_body_entry(model, scenario));
}

GaitPlan plan_whole_body_climb(const StepScenario& scenario, const RobotModel& model, const RobotState& entry) {
  scenario.validate();
  GaitPlan plan;
  plan.kind = GaitKind::kWholeBody;
  plan.step_height = scenario.step_height;
  plan.start = entry;
  if (foothold_x(model) - model.gait.stride_length + model.track.radius() > 0.0) {
    throw PlanningError("entry stance", "stride too short to start the front tracks clear of the step");
  }
  Planner planner(model, scenario, plan);
  for (LegId id : kAllLegs) {
    const Vec3 tip = planner.current().tips[leg_index(id)];
    if (std::abs(tip.z() - model.track.radius()) > 1e-6 || tip.x() > -model.track.radius()) {
      throw PlanningError("entry stance", std::string(leg_name(id)) + " track is not on the ground before the step");
    }
  }
  const auto& order = model.gait.swing_order;

  // Tracks carry the robot to the standard stance if it starts elsewhere.
  const RobotState standard = whole_body_entry(model, scenario);
  const double travel = standard.body.x - entry.body.x;
  if (std::abs(travel) > 1e-9 || std::abs(entry.body.pitch) > 1e-9 || std::abs(standard.body.z - entry.body.z) > 1e-9) {
    auto tips = planner.current().tips;
    for (auto& t : tips) t.x() += travel;
    planner.shift(travel >= 0.0 ? GaitPhase::Kind::kBodyShiftForward : GaitPhase::Kind::kBodyShiftBackward,
                  standard.body, tips, "approach");
  }

  BodyPose back = planner.current().body;
  back.x -= model.gait.backward_shift;
  planner.shift(GaitPhase::Kind::kBodyShiftBackward, back, planner.current().tips, "backward body shift");
  for (int k = 0; k < 2; ++k) {
    const LegId id = order[k];
    planner.swing(id, landing(model, scenario, planner.current().tips[leg_index(id)]),
                  std::string("swing ") + leg_name(id));
  }
  plan_rear_portion(planner, model, scenario);
  return plan;
}

GaitPlan plan_rear_body_climb(const StepScenario& scenario, const RobotModel& model) {
  return plan_rear_body_climb(scenario, model, rear_body_entry(model, scenario));
}

GaitPlan plan_rear_body_climb(const StepScenario& scenario, const RobotModel& model,
                              const RobotState& entry) {
  scenario.validate();
  GaitPlan plan;
  plan.kind = GaitKind::kRearBody;
  plan.step_height = scenario.step_height;
  plan.start = entry;
  Planner planner(model, scenario, plan);
  for (LegId id : {LegId::kFrontLeft, LegId::kFrontRight}) {
    const Vec3 tip = planner.current().tips[leg_index(id)];
    // the contact point sits under the track axis, so any axis past the edge rests on top
    if (tip.x() < 0.0 ||
        std::abs(tip.z() - scenario.step_height - model.track.radius()) > 1e-6) {
      throw PlanningError("entry stance", std::string(leg_name(id)) + " track is not on the step");
    }
  }
  for (LegId id : {LegId::kRearLeft, LegId::kRearRight}) {
    if (planner.current().tips[leg_index(id)].x() > -model.track.radius()) {
      throw PlanningError("entry stance", std::string(leg_name(id)) + " track is not clear of the step");
    }
  }
  plan_rear_portion(planner, model, scenario);
  return plan;
}

double stability_margin(const RobotModel& model, const RobotState& state) {
  std::vector<Vec3> support;
  for (LegId id : kAllLegs) {
    if (state.contact[leg_index(id)]) support.push_back(tip_world(model, state, id));
  }
  return polygon_margin(support, center_of_mass(model, state));
}

double terrain_distance(const StepScenario& scenario, const Vec3& tip) {
  const double x = tip.x(), z = tip.z(), h = scenario.step_height;
  if (x >= 0.0) {
    // Upper surface, or the top corner from below the lip.
    return z >= h ? z - h : (z >= 0.0 ? -std::min(x, h - z) : z);
  }
  if (z >= h) return std::min(z, std::hypot(x, z - h));
  return std::min(z, -x);
}

std::vector<GaitSample> execute_gait(const GaitPlan& plan, const RobotModel& model,
                                     const StepScenario& scenario, const RobotState& state) {
  (void)scenario;
  std::vector<GaitSample> out;
  if (plan.phases.empty()) return out;
  if ((state.body.position() - plan.start.body.position()).norm() > 1e-9 ||
      std::abs(state.body.pitch - plan.start.body.pitch) > 1e-9) {
    throw ExecutionError(0, 0, "state does not match the plan's entry configuration");
  }

  RobotState cur = state;
  cur.contact = {true, true, true, true};
  const double dt = model.dt;
  const double r = model.track.radius();

  auto emit = [&](int phase_index, int sample_index, const RobotState& prev, const RobotState& next) {
    GaitSample g;
    g.state = next;
    g.phase_index = phase_index;
    std::array<Vec3, kLegCount> tips;
    std::vector<Vec3> support;
    std::vector<int> support_legs;
    for (LegId id : kAllLegs) {
      const int i = leg_index(id);
      tips[i] = tip_world(model, next, id);
      g.velocity[i] = (next.q[i] - prev.q[i]) / dt;
      if (next.contact[i]) {
        support.push_back(tips[i]);
        support_legs.push_back(i);
      }
    }
    const SupportState ss{support, center_of_mass(model, next), model.weight()};
    std::vector<double> vertical;
    try {
      g.margin = polygon_margin(support, ss.com);
      vertical = support_forces(ss);
    } catch (const SupportError& e) {
      throw ExecutionError(phase_index, sample_index, e.what());
    }
    std::array<Vec3, kLegCount> forces = zeros_per_leg<Vec3>();
    std::array<double, kLegCount> normal{};
    for (size_t k = 0; k < support_legs.size(); ++k) {
      forces[support_legs[k]] = Vec3(0.0, 0.0, vertical[k]);
      normal[support_legs[k]] = vertical[k];
    }
    g.torque = joint_torques(model, next, forces);
    for (LegId id : kAllLegs) {
      const int i = leg_index(id);
      for (int j = 0; j < kJointsPerLeg; ++j) {
        g.energy[actuator_index(id, j)] = motor_power(g.torque[i][j], g.velocity[i][j], model.leg_motor);
      }
      // Tracks of supporting legs that slide roll against rolling resistance.
      double omega = 0.0, tau = 0.0;
      if (next.contact[i] && prev.contact[i]) {
        const double v = (tips[i].x() - tip_world(model, prev, id).x()) / dt;
        if (std::abs(v) > 1e-9) {
          omega = v / r;
          tau = r * model.track.rolling_resistance * normal[i] * (v > 0.0 ? 1.0 : -1.0);
        }
      }
      g.energy[track_actuator(id)] = motor_power(tau, omega, model.track_motor);
    }
    out.push_back(std::move(g));
  };

  for (size_t pi = 0; pi < plan.phases.size(); ++pi) {
    const int phase_index = static_cast<int>(pi);
    cur = trace_phase(model, plan.phases[pi], phase_index, cur,
                      [&](int sample_index, const RobotState& prev, const RobotState& next) {
                        emit(phase_index, sample_index, prev, next);
                      });
  }
  return out;
}

}  // namespace stepsim
