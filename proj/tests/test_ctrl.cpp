#include <doctest.h>

#include <map>
#include <random>

#include "stepsim/ctrl.hpp"

using namespace stepsim;

namespace {

ThresholdTable sample_table() {
  return ThresholdTable({{0.08, 100.0, 50.0}, {0.16, 120.0, 60.0}, {0.24, 150.0, 80.0}});
}

EnergySample random_sample(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(0.0, scale);
  EnergySample s;
  for (auto& e : s) {
    e.mechanical = u(rng);
    e.heat = u(rng);
  }
  return s;
}

struct Runs {
  std::map<int, NegotiationResult> hybrid;
  std::map<int, NegotiationResult> baseline;
};

const Runs& reference_runs() {
  static const Runs runs = [] {
    Runs r;
    const RobotModel model = reference_model();
    const double h = model.track.height;
    const PrestudyResult pre = prestudy(model, {h, 2 * h, 3 * h});
    for (int k = 1; k <= 4; ++k) {
      const StepScenario sc = scenario_for(model, k * h);
      if (pre.table.covers(sc.step_height)) r.hybrid[k] = run_negotiation(sc, model, pre.table);
      r.baseline[k] = run_baseline(sc, model);
    }
    return r;
  }();
  return runs;
}

std::vector<const NegotiationResult*> all_runs() {
  std::vector<const NegotiationResult*> out;
  for (const auto& [k, r] : reference_runs().hybrid) out.push_back(&r);
  for (const auto& [k, r] : reference_runs().baseline) out.push_back(&r);
  return out;
}

}  // namespace

TEST_CASE("lookup returns rows exactly and interpolates between them") {
  const ThresholdTable t = sample_table();
  const Thresholds a = lookup_thresholds(t, 0.16);
  CHECK(a.whole == 120.0);
  CHECK(a.rear == 60.0);
  const Thresholds b = lookup_thresholds(t, 0.20);
  CHECK(b.whole == doctest::Approx(135.0));
  CHECK(b.rear == doctest::Approx(70.0));
  CHECK(b.height == 0.20);
  CHECK(lookup_thresholds(t, 0.08).whole == 100.0);
  CHECK(lookup_thresholds(t, 0.24).rear == 80.0);
  CHECK_THROWS_AS(lookup_thresholds(t, 0.07), std::out_of_range);
  CHECK_THROWS_AS(lookup_thresholds(t, 0.25), std::out_of_range);
  CHECK_THROWS_AS(lookup_thresholds(ThresholdTable{}, 0.1), std::out_of_range);
}

TEST_CASE("tables reject bad rows") {
  CHECK_THROWS_AS(ThresholdTable({{0.16, 100, 50}, {0.08, 120, 60}}), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdTable({{0.08, 100, 50}, {0.08, 120, 60}}), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdTable({{0.08, 50, 100}}), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdTable({{0.08, -1, -2}}), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdTable({{0.0, 1, 1}}), std::invalid_argument);
}

TEST_CASE("crossings are strict and whole-body wins a tie") {
  EnergyLedger l;
  const Thresholds t{0.16, 10.0, 5.0};
  l.whole = 10.0;
  l.rear = 5.0;
  CHECK_FALSE(threshold_crossing(l, t).has_value());
  l.rear = 5.0000001;
  CHECK(threshold_crossing(l, t) == GaitKind::kRearBody);
  l.whole = 10.0000001;
  CHECK(threshold_crossing(l, t) == GaitKind::kWholeBody);
  CHECK_FALSE(threshold_crossing(l, unreachable_thresholds(0.16)).has_value());
}

TEST_CASE("decision step only fires from rolling") {
  ControllerState s;
  s.ledger.armed = true;
  const Thresholds t{0.16, 1e-3, 1e-4};
  std::mt19937_64 rng(1);
  const EnergySample sample = random_sample(rng, 1.0);
  const ControllerState fired = decision_step(s, t, sample);
  CHECK(fired.mode == Mode::kPreparingTransition);
  CHECK(fired.gait.has_value());

  s.mode = Mode::kRollingResumed;
  const ControllerState resumed = decision_step(s, t, sample);
  CHECK(resumed.mode == Mode::kRollingResumed);
  CHECK(resumed.ledger.total > 0.0);

  s.mode = Mode::kWalkingCycle;
  CHECK_THROWS_AS(decision_step(s, t, sample), std::logic_error);
}

TEST_CASE("transition tick matches a brute-force first crossing") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 60);
  std::uniform_real_distribution<double> frac(0.0, 1.3), scale(0.01, 2.0);
  const auto all = all_actuators();
  const auto rear = rear_actuators();
  int fired = 0;
  for (int trace = 0; trace < 100000; ++trace) {
    const int n = len(rng);
    const int arm = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const double sc = scale(rng);
    std::vector<EnergySample> samples;
    for (int i = 0; i < n; ++i) samples.push_back(random_sample(rng, sc));

    // Ledger totals the trace could reach, to pick thresholds around them.
    double reach_w = 0.0, reach_r = 0.0;
    for (int i = arm; i < n; ++i) {
      reach_w += sample_power(samples[i], all) * 0.002;
      reach_r += sample_power(samples[i], rear) * 0.002;
    }
    Thresholds t{0.16, std::max(1e-12, frac(rng) * reach_w), 0.0};
    t.rear = std::max(1e-12, std::min(t.whole, frac(rng) * reach_r));

    // brute force
    std::optional<int> expect_tick;
    std::optional<GaitKind> expect_gait;
    double w = 0.0, r = 0.0;
    for (int i = arm; i < n; ++i) {
      w += sample_power(samples[i], all) * 0.002;
      r += sample_power(samples[i], rear) * 0.002;
      if (w > t.whole || r > t.rear) {
        expect_tick = i;
        expect_gait = w > t.whole ? GaitKind::kWholeBody : GaitKind::kRearBody;
        break;
      }
    }

    ControllerState s;
    std::optional<int> got_tick;
    for (int i = 0; i < n; ++i) {
      if (i == arm) s.ledger.armed = true;
      s = decision_step(s, t, samples[i]);
      if (s.mode == Mode::kPreparingTransition) {
        got_tick = i;
        break;
      }
    }
    REQUIRE(got_tick == expect_tick);
    if (got_tick) {
      REQUIRE(s.gait == expect_gait);
      ++fired;
    }
  }
  CHECK(fired > 10000);
  CHECK(fired < 100000);
}

TEST_CASE("mode graph") {
  CHECK(transition_allowed(Mode::kRolling, Mode::kPreparingTransition));
  CHECK(transition_allowed(Mode::kRolling, Mode::kCompleted));
  CHECK(transition_allowed(Mode::kPreparingTransition, Mode::kWalkingCycle));
  CHECK(transition_allowed(Mode::kWalkingCycle, Mode::kRollingResumed));
  CHECK(transition_allowed(Mode::kRollingResumed, Mode::kCompleted));
  CHECK(transition_allowed(Mode::kWalkingCycle, Mode::kFailed));
  CHECK_FALSE(transition_allowed(Mode::kRollingResumed, Mode::kPreparingTransition));
  CHECK_FALSE(transition_allowed(Mode::kCompleted, Mode::kFailed));
  CHECK_FALSE(transition_allowed(Mode::kWalkingCycle, Mode::kRolling));
}

TEST_CASE("preparation backs off the configured distance") {
  const RobotModel model = reference_model();
  const StepScenario sc = scenario_for(model, 0.16);
  const PreparationPlan p = preparation_phase(model, sc, -0.2);
  CHECK(p.speed < 0.0);
  CHECK(p.ticks > 0);
  CHECK(p.start_rear_x - p.end_rear_x == doctest::Approx(model.gait.preparation_distance).epsilon(0.05));
}

TEST_CASE("reference runs follow the mode graph") {
  for (const NegotiationResult* r : all_runs()) {
    REQUIRE_FALSE(r->timeline.empty());
    CHECK(r->timeline.front().mode == Mode::kRolling);
    for (size_t i = 1; i < r->timeline.size(); ++i) {
      CHECK(transition_allowed(r->timeline[i - 1].mode, r->timeline[i].mode));
      CHECK(r->timeline[i].first_tick == r->timeline[i - 1].last_tick + 1);
    }
    REQUIRE(r->path.size() >= 2);
    CHECK(r->path.front() == Mode::kRolling);
    for (size_t i = 1; i < r->path.size(); ++i) CHECK(transition_allowed(r->path[i - 1], r->path[i]));
    const Mode terminal = r->outcome == Outcome::kFailed ? Mode::kFailed : Mode::kCompleted;
    CHECK(r->path.back() == terminal);
    // the ticked spans appear in the path in the same order
    size_t at = 0;
    for (const ModeSpan& s : r->timeline) {
      while (at < r->path.size() && r->path[at] != s.mode) ++at;
      CHECK(at < r->path.size());
    }
    CHECK(r->transitions() <= 1);
  }
}

TEST_CASE("ledgers never decrease and the rear share stays below the whole") {
  for (const NegotiationResult* r : all_runs()) {
    for (size_t i = 1; i < r->curves.size(); ++i) {
      const CurvePoint& a = r->curves[i - 1];
      const CurvePoint& b = r->curves[i];
      CHECK(b.whole >= a.whole);
      CHECK(b.rear >= a.rear);
      CHECK(b.total >= a.total);
      CHECK(b.rear <= b.whole);
      CHECK(b.whole <= b.total);
      CHECK(b.tick == a.tick + 1);
    }
  }
}

TEST_CASE("reference outcomes") {
  const Runs& runs = reference_runs();
  CHECK(runs.hybrid.at(1).outcome == Outcome::kCompletedRolling);
  CHECK(runs.hybrid.at(1).transitions() == 0);
  for (int k : {2, 3}) {
    const NegotiationResult& r = runs.hybrid.at(k);
    CHECK(r.outcome == Outcome::kCompletedHybrid);
    CHECK(r.transitions() == 1);
    CHECK(r.gait == GaitKind::kRearBody);
    CHECK(r.total_energy < runs.baseline.at(k).total_energy);
    CHECK(r.min_margin >= 0.0);
    CHECK(r.max_airborne_legs <= 1);
  }
  CHECK(runs.baseline.at(4).outcome == Outcome::kFailed);
  CHECK(runs.baseline.at(4).failure.find("friction") != std::string::npos);
}

TEST_CASE("rolling-only baselines never transition") {
  for (const auto& [k, r] : reference_runs().baseline) {
    CHECK(r.transitions() == 0);
    for (const ModeSpan& s : r.timeline) CHECK(s.mode != Mode::kWalkingCycle);
  }
}

TEST_CASE("runs are deterministic") {
  const RobotModel model = reference_model();
  const StepScenario sc = scenario_for(model, 2 * model.track.height);
  const ThresholdTable t = prestudy(model, {2 * model.track.height}).table;
  const NegotiationResult a = run_negotiation(sc, model, t);
  const NegotiationResult b = run_negotiation(sc, model, t);
  REQUIRE(a.curves.size() == b.curves.size());
  for (size_t i = 0; i < a.curves.size(); ++i) {
    CHECK(a.curves[i].whole == b.curves[i].whole);
    CHECK(a.curves[i].total == b.curves[i].total);
    CHECK(a.curves[i].body.x == b.curves[i].body.x);
  }
  CHECK(a.transition_tick == b.transition_tick);
}

TEST_CASE("prestudy ordering") {
  const RobotModel model = reference_model();
  const double h = model.track.height;
  const PrestudyResult pre = prestudy(model, {h, 2 * h, 3 * h});
  REQUIRE(pre.table.rows().size() == 3);
  double prev = 0.0;
  for (const Thresholds& t : pre.table.rows()) {
    CHECK(t.rear < t.whole);
    CHECK(t.whole >= prev);
    prev = t.whole;
  }
}
