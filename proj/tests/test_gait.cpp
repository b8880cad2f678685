#include <doctest.h>

#include <cmath>

#include "stepsim/ctrl.hpp"
#include "stepsim/gait.hpp"

using namespace stepsim;

namespace {

struct Executed {
  GaitPlan plan;
  std::vector<GaitSample> samples;
};

Executed execute(const RobotModel& model, GaitKind kind, double height) {
  const StepScenario sc = scenario_for(model, height);
  Executed e;
  e.plan = kind == GaitKind::kWholeBody ? plan_whole_body_climb(sc, model) : plan_rear_body_climb(sc, model);
  e.samples = execute_gait(e.plan, model, sc, e.plan.start);
  return e;
}

}  // namespace

TEST_CASE("both gaits stay statically stable with one leg in the air at most") {
  const RobotModel model = reference_model();
  for (GaitKind kind : {GaitKind::kWholeBody, GaitKind::kRearBody}) {
    for (double k : {1.0, 2.0, 3.0}) {
      CAPTURE(gait_name(kind));
      CAPTURE(k);
      const Executed e = execute(model, kind, k * model.track.height);
      REQUIRE_FALSE(e.samples.empty());
      double worst = INFINITY;
      int airborne = 0;
      for (const GaitSample& s : e.samples) {
        worst = std::min(worst, s.margin);
        airborne = std::max(airborne, kLegCount - s.state.contact_count());
        CHECK(stability_margin(model, s.state) == doctest::Approx(s.margin));
      }
      CHECK(worst >= 0.0);
      CHECK(airborne <= 1);
    }
  }
}

TEST_CASE("the rear-body gait swings only the rear legs") {
  const RobotModel model = reference_model();
  for (double k : {1.0, 2.0, 3.0}) {
    const Executed e = execute(model, GaitKind::kRearBody, k * model.track.height);
    int swings = 0;
    for (const GaitPhase& p : e.plan.phases) {
      if (p.kind != GaitPhase::Kind::kLegSwing) continue;
      ++swings;
      REQUIRE(p.leg.has_value());
      CHECK_FALSE(is_front(*p.leg));
    }
    CHECK(swings == 2);
    for (const GaitSample& s : e.samples) {
      CHECK(s.state.contact[leg_index(LegId::kFrontLeft)]);
      CHECK(s.state.contact[leg_index(LegId::kFrontRight)]);
    }
  }
}

TEST_CASE("the whole-body gait swings every leg once") {
  const RobotModel model = reference_model();
  const Executed e = execute(model, GaitKind::kWholeBody, 2 * model.track.height);
  std::array<int, kLegCount> count{};
  for (const GaitPhase& p : e.plan.phases) {
    if (p.kind == GaitPhase::Kind::kLegSwing) ++count[leg_index(*p.leg)];
  }
  for (int c : count) CHECK(c == 1);
}

TEST_CASE("every track ends resting on the upper surface") {
  const RobotModel model = reference_model();
  const double r = model.track.radius();
  for (GaitKind kind : {GaitKind::kWholeBody, GaitKind::kRearBody}) {
    for (double k : {1.0, 2.0, 3.0}) {
      const double height = k * model.track.height;
      const Executed e = execute(model, kind, height);
      const RobotState& last = e.samples.back().state;
      for (LegId id : kAllLegs) {
        const Vec3 tip = tip_world(model, last, id);
        CHECK(tip.x() > 0.0);
        CHECK(std::abs(tip.z() - (height + r)) <= 1e-6);
        CHECK(last.contact[leg_index(id)]);
      }
    }
  }
}

TEST_CASE("tracks never cut into the terrain") {
  const RobotModel model = reference_model();
  const double r = model.track.radius();
  for (GaitKind kind : {GaitKind::kWholeBody, GaitKind::kRearBody}) {
    for (double k : {1.0, 2.0, 3.0}) {
      const StepScenario sc = scenario_for(model, k * model.track.height);
      const Executed e = execute(model, kind, sc.step_height);
      double worst = INFINITY;
      for (const GaitSample& s : e.samples) {
        for (LegId id : kAllLegs) worst = std::min(worst, terrain_distance(sc, tip_world(model, s.state, id)));
      }
      CHECK(worst >= r - 1e-6);
    }
  }
}

TEST_CASE("joint angles stay within limits and energies are non-negative") {
  const RobotModel model = reference_model();
  const Executed e = execute(model, GaitKind::kWholeBody, 3 * model.track.height);
  for (const GaitSample& s : e.samples) {
    for (LegId id : kAllLegs) CHECK(within_limits(model.leg(id), s.state.joints(id)));
    for (const auto& en : s.energy) {
      CHECK(en.mechanical >= 0.0);
      CHECK(en.heat >= 0.0);
    }
  }
}

TEST_CASE("segments are whole ticks and samples cover the plan") {
  const RobotModel model = reference_model();
  for (GaitKind kind : {GaitKind::kWholeBody, GaitKind::kRearBody}) {
    const Executed e = execute(model, kind, 2 * model.track.height);
    long ticks = 0;
    for (const GaitPhase& p : e.plan.phases) {
      for (double d : p.segment_durations) {
        const double n = d / model.dt;
        CHECK(std::abs(n - std::round(n)) < 1e-9);
        ticks += std::lround(n);
      }
    }
    CHECK(static_cast<long>(e.samples.size()) == ticks);
    CHECK(e.plan.duration() == doctest::Approx(ticks * model.dt));
  }
}

TEST_CASE("higher steps cost more to climb") {
  const RobotModel model = reference_model();
  const auto all = all_actuators();
  double prev = 0.0;
  for (double k : {1.0, 2.0, 3.0}) {
    const Executed e = execute(model, GaitKind::kWholeBody, k * model.track.height);
    std::vector<EnergySample> series;
    for (const auto& s : e.samples) series.push_back(s.energy);
    const double energy = integrate_energy(series, model.dt, all);
    CHECK(energy > prev);
    prev = energy;
  }
}

TEST_CASE("executing from the wrong pose is refused") {
  const RobotModel model = reference_model();
  const StepScenario sc = scenario_for(model, 2 * model.track.height);
  const GaitPlan plan = plan_whole_body_climb(sc, model);
  RobotState off = plan.start;
  off.body.x += 0.01;
  CHECK_THROWS_AS(execute_gait(plan, model, sc, off), ExecutionError);
}

TEST_CASE("stability margin needs three supports") {
  const RobotModel model = reference_model();
  RobotState s = home_state(model, 0.0);
  CHECK(stability_margin(model, s) > 0.0);
  s.contact = {true, true, false, false};
  CHECK_THROWS_AS(stability_margin(model, s), SupportError);
}

TEST_CASE("terrain distance") {
  StepScenario sc;
  sc.step_height = 0.16;
  CHECK(terrain_distance(sc, Vec3(-1.0, 0, 0.04)) == doctest::Approx(0.04));
  CHECK(terrain_distance(sc, Vec3(0.5, 0, 0.2)) == doctest::Approx(0.04));
  CHECK(terrain_distance(sc, Vec3(-0.03, 0, 0.1)) == doctest::Approx(0.03));
  CHECK(terrain_distance(sc, Vec3(-0.03, 0, 0.2)) == doctest::Approx(0.05));
}

TEST_CASE("per-leg vectors start at zero") {
  // Eigen does not zero on construction; swing legs rely on these.
  const RobotState s;
  for (const JointVector& q : s.q) CHECK(q.isZero(0.0));
  const GaitSample g;
  for (int i = 0; i < kLegCount; ++i) {
    CHECK(g.torque[i].isZero(0.0));
    CHECK(g.velocity[i].isZero(0.0));
  }
  for (const Vec3& v : zeros_per_leg<Vec3>()) CHECK(v.isZero(0.0));
}
