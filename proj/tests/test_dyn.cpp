#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "stepsim/ctrl.hpp"
#include "stepsim/dyn.hpp"

using namespace stepsim;

namespace {

EnergySample constant_sample(double torque, double velocity, const MotorParams& m) {
  EnergySample s;
  for (auto& e : s) e = motor_power(torque, velocity, m);
  return s;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Potential of the leg under fixed tip forces and link gravity; its gradient
// in q is the holding torque.
double leg_potential(const RobotModel& model, const RobotState& state, LegId id, const JointVector& q,
                     const Vec3& force) {
  RobotState s = state;
  s.joints(id) = q;
  const LegChain& leg = model.leg(id);
  double v = -force.dot(tip_world(model, s, id));
  for (int i = 0; i < kJointsPerLeg; ++i) {
    const Vec3 p_shoulder = point_position(leg, q, i, Vec3(-0.5 * leg.links[i].a, 0.0, 0.0));
    const Vec3 p_body = leg.mount.block<3, 3>(0, 0) * p_shoulder + leg.mount.block<3, 1>(0, 3);
    v += model.link_mass(i) * model.mass.gravity * body_to_world(s.body, p_body).z();
  }
  return v;
}

}  // namespace

TEST_CASE("negative mechanical power is clamped to zero") {
  const MotorParams m{0.5, 2.0};
  const EnergyEntry e = motor_power(3.0, -4.0, m);
  CHECK(e.mechanical == 0.0);
  CHECK(e.current == 6.0);
  CHECK(e.heat == 72.0);
  CHECK(e.total() == 72.0);

  const EnergyEntry f = motor_power(-3.0, -4.0, m);
  CHECK(f.mechanical == 12.0);
  CHECK(f.heat == 72.0);
}

TEST_CASE("unit motor values") {
  const EnergyEntry e = motor_power(1.0, 1.0, MotorParams{1.0, 1.0});
  CHECK(e.mechanical == 1.0);
  CHECK(e.heat == 1.0);
  CHECK(motor_power(0.0, 5.0, MotorParams{}).total() == 0.0);
}

TEST_CASE("constant power integrates to the closed form") {
  const MotorParams m{0.5, 1.0};
  const std::vector<EnergySample> series(500, constant_sample(1.0, 2.0, m));
  const auto all = all_actuators();
  // 20 actuators * (2 W + 4 W) * 500 steps; binary-exact step
  CHECK(integrate_energy(series, 1.0 / 512, all) == 20 * 6.0 * 500 / 512);
  CHECK(integrate_energy(series, 0.002, all) == doctest::Approx(20 * 6.0 * 500 * 0.002).epsilon(1e-13));
  const std::vector<EnergySample> ones(64, constant_sample(1.0, 1.0, MotorParams{1.0, 1.0}));
  CHECK(integrate_energy(ones, 0.25, all) == 20 * 2.0 * 64 * 0.25);
}

TEST_CASE("halving dt with the series doubled keeps the energy") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<EnergySample> coarse, fine;
  const MotorParams m{};
  for (int n = 0; n < 100; ++n) {
    EnergySample s;
    for (auto& e : s) e = motor_power(u(rng), u(rng), m);
    coarse.push_back(s);
    fine.push_back(s);
    fine.push_back(s);
  }
  const auto all = all_actuators();
  CHECK(integrate_energy(fine, 0.001, all) == doctest::Approx(integrate_energy(coarse, 0.002, all)).epsilon(1e-14));
}

TEST_CASE("energy is additive over subsets and concatenation") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<EnergySample> series;
  for (int n = 0; n < 50; ++n) {
    EnergySample s;
    for (auto& e : s) e = motor_power(u(rng), u(rng), MotorParams{});
    series.push_back(s);
  }
  const auto all = all_actuators();
  const auto rear = rear_actuators();
  std::vector<int> front;
  for (int i : all) {
    if (std::find(rear.begin(), rear.end(), i) == rear.end()) front.push_back(i);
  }
  const double dt = 0.002;
  CHECK(integrate_energy(series, dt, all) ==
        doctest::Approx(integrate_energy(series, dt, rear) + integrate_energy(series, dt, front)).epsilon(1e-14));
  const std::span<const EnergySample> s(series);
  CHECK(integrate_energy(s, dt, all) ==
        doctest::Approx(integrate_energy(s.first(20), dt, all) + integrate_energy(s.subspan(20), dt, all))
            .epsilon(1e-14));
}

TEST_CASE("rear subset is the rear legs and tracks") {
  const auto rear = rear_actuators();
  CHECK(rear.size() == 10);
  for (LegId id : {LegId::kRearLeft, LegId::kRearRight}) {
    for (int j = 0; j <= kJointsPerLeg; ++j) {
      CHECK(std::find(rear.begin(), rear.end(), actuator_index(id, j)) != rear.end());
    }
  }
  CHECK(all_actuators().size() == kActuatorCount);
}

TEST_CASE("ledger meters only once armed") {
  EnergyLedger l;
  const EnergySample s = constant_sample(1.0, 1.0, MotorParams{1.0, 1.0});
  l.accumulate(s);
  CHECK(l.whole == 0.0);
  CHECK(l.rear == 0.0);
  CHECK(l.total == doctest::Approx(40 * 0.002));
  l.armed = true;
  l.accumulate(s);
  CHECK(l.whole == doctest::Approx(40 * 0.002));
  CHECK(l.rear == doctest::Approx(20 * 0.002));
  CHECK(l.rear <= l.whole);
}

TEST_CASE("symmetric stance carries a quarter of the weight per contact") {
  SupportState s;
  s.contacts = {Vec3(0.3, 0.2, 0), Vec3(0.3, -0.2, 0), Vec3(-0.3, 0.2, 0), Vec3(-0.3, -0.2, 0)};
  s.weight = 196.2;
  const auto f = support_forces(s);
  for (double v : f) CHECK(v == doctest::Approx(196.2 / 4).epsilon(1e-12));
}

TEST_CASE("three contacts are statically determinate") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5), w(0.0, 1.0);
  for (int n = 0; n < 300; ++n) {
    SupportState s;
    s.contacts = {Vec3(u(rng), u(rng), 0), Vec3(u(rng), u(rng), 0), Vec3(u(rng), u(rng), 0)};
    Eigen::Matrix3d a;
    for (int k = 0; k < 3; ++k) a.col(k) << 1.0, s.contacts[k].x(), s.contacts[k].y();
    if (std::abs(a.determinant()) < 1e-2) continue;
    // COM as a random convex combination
    double b0 = w(rng), b1 = w(rng), b2 = w(rng);
    const double t = b0 + b1 + b2;
    s.com = (b0 * s.contacts[0] + b1 * s.contacts[1] + b2 * s.contacts[2]) / t;
    s.weight = 100.0;
    const auto f = support_forces(s);
    const Eigen::Vector3d ref = a.fullPivLu().solve(Eigen::Vector3d(100.0, 100.0 * s.com.x(), 100.0 * s.com.y()));
    for (int k = 0; k < 3; ++k) CHECK(f[k] == doctest::Approx(ref[k]).epsilon(1e-9).scale(100));
  }
}

TEST_CASE("support forces balance weight and moments") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.5, 0.5), w(0.0, 1.0), m(10.0, 500.0);
  int tested = 0;
  for (int n = 0; n < 2000; ++n) {
    SupportState s;
    for (int k = 0; k < 4; ++k) s.contacts.emplace_back(u(rng), u(rng), u(rng));
    Vec3 com = Vec3::Zero();
    double t = 0.0;
    for (const auto& c : s.contacts) {
      const double b = w(rng);
      com += b * c;
      t += b;
    }
    s.com = com / t;
    s.weight = m(rng);
    if (polygon_margin(s.contacts, s.com) < 1e-6) continue;
    const auto f = support_forces(s);
    ++tested;
    CHECK(std::abs(sum(f) - s.weight) / s.weight <= 1e-9);
    double mx = 0.0, my = 0.0;
    for (size_t k = 0; k < f.size(); ++k) {
      CHECK(f[k] >= 0.0);
      mx += f[k] * (s.contacts[k].x() - s.com.x());
      my += f[k] * (s.contacts[k].y() - s.com.y());
    }
    CHECK(std::abs(mx) <= 1e-9 * s.weight);
    CHECK(std::abs(my) <= 1e-9 * s.weight);
  }
  CHECK(tested > 500);
}

TEST_CASE("moving the COM toward a contact loads it") {
  SupportState s;
  s.contacts = {Vec3(0.3, 0.2, 0), Vec3(0.3, -0.2, 0), Vec3(-0.3, 0.2, 0), Vec3(-0.3, -0.2, 0)};
  s.weight = 100.0;
  double prev = 0.0;
  for (double x = -0.25; x <= 0.25; x += 0.05) {
    s.com = Vec3(x, 0, 0);
    const auto f = support_forces(s);
    CHECK(f[0] >= prev - 1e-12);
    prev = f[0];
  }
}

TEST_CASE("weightless body needs no support") {
  SupportState s;
  s.contacts = {Vec3(0.3, 0.2, 0), Vec3(0.3, -0.2, 0), Vec3(-0.3, 0.0, 0)};
  const auto f = support_forces(s);
  for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("tip-over and too few contacts are errors") {
  SupportState s;
  s.contacts = {Vec3(0.3, 0.2, 0), Vec3(0.3, -0.2, 0), Vec3(-0.3, 0.0, 0)};
  s.com = Vec3(0.5, 0, 0);
  s.weight = 10.0;
  CHECK_THROWS_AS(support_forces(s), SupportError);
  s.contacts.pop_back();
  s.com = Vec3::Zero();
  CHECK_THROWS_AS(support_forces(s), SupportError);
  CHECK_THROWS_AS(polygon_margin(s.contacts, s.com), SupportError);
}

TEST_CASE("polygon margin is the distance to the nearest edge") {
  const std::vector<Vec3> square = {Vec3(1, 1, 0), Vec3(-1, 1, 0), Vec3(-1, -1, 0), Vec3(1, -1, 0)};
  CHECK(polygon_margin(square, Vec3::Zero()) == doctest::Approx(1.0));
  CHECK(polygon_margin(square, Vec3(0.5, 0.2, 3.0)) == doctest::Approx(0.5));
  CHECK(polygon_margin(square, Vec3(2.0, 0.0, 0.0)) == doctest::Approx(-1.0));
  CHECK(polygon_margin(square, Vec3(2.0, 2.0, 0.0)) == doctest::Approx(-std::sqrt(2.0)));
}

TEST_CASE("holding torques match the virtual-work oracle") {
  const RobotModel model = reference_model();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> f(-80.0, 80.0), a(-0.3, 0.3), p(-0.2, 0.2);
  const double h = 1e-6;
  for (int n = 0; n < 100; ++n) {
    RobotState state = home_state(model, 0.0);
    state.body.pitch = p(rng);
    std::array<Vec3, kLegCount> forces;
    for (LegId id : kAllLegs) {
      JointVector q = model.leg(id).home();
      for (int j = 0; j < kJointsPerLeg; ++j) q[j] += a(rng);
      state.joints(id) = q;
      forces[leg_index(id)] = Vec3(f(rng), f(rng), f(rng));
    }
    const auto tau = joint_torques(model, state, forces);
    for (LegId id : kAllLegs) {
      const JointVector& q = state.joints(id);
      JointVector oracle;
      for (int j = 0; j < kJointsPerLeg; ++j) {
        JointVector qp = q, qm = q;
        qp[j] += h;
        qm[j] -= h;
        oracle[j] = (leg_potential(model, state, id, qp, forces[leg_index(id)]) -
                     leg_potential(model, state, id, qm, forces[leg_index(id)])) /
                    (2 * h);
      }
      CHECK((tau[leg_index(id)] - oracle).norm() / oracle.norm() <= 1e-5);
    }
  }
}

TEST_CASE("a vertical tip force on a stretched leg acts through the moment arm") {
  RobotModel model = reference_model();
  model.mass.leg_fraction = 0.0;
  RobotState state = home_state(model, 0.0);
  const LegId id = LegId::kFrontLeft;
  std::array<Vec3, kLegCount> forces{};
  forces[0] = Vec3(0, 0, 50.0);
  const auto tau = joint_torques(model, state, forces);
  // last joint: only the distal link's horizontal reach matters
  const LegChain& leg = model.leg(id);
  const Vec3 tip = tip_world(model, state, id);
  const Vec3 joint4 = body_to_world(state.body, leg.mount.block<3, 3>(0, 0) *
                                                    point_position(leg, state.joints(id), 2, Vec3::Zero()) +
                                                leg.mount.block<3, 1>(0, 3));
  CHECK(std::abs(tau[0][3]) == doctest::Approx(50.0 * std::abs(tip.x() - joint4.x())).epsilon(1e-9));
}

TEST_CASE("flat rolling needs only the rolling resistance") {
  const RobotModel model = reference_model();
  StepScenario sc = scenario_for(model, model.track.height);
  const RollingDrive d = rolling_drive(model, sc, -2.0);
  CHECK(d.feasible);
  CHECK(d.pose.body.pitch == 0.0);
  double torque = 0.0, normal = 0.0;
  for (int i = 0; i < kLegCount; ++i) {
    torque += d.track_torque[i];
    normal += d.normal[i];
  }
  CHECK(normal == doctest::Approx(model.weight()).epsilon(1e-9));
  CHECK(torque == doctest::Approx(model.track.rolling_resistance * model.weight() * model.track.radius())
                      .epsilon(1e-9));
  CHECK(d.utilized_friction == doctest::Approx(model.track.rolling_resistance));
  CHECK(d.climb_force == 0.0);

  const RollingDrive back = rolling_drive(model, sc, -2.0, -1);
  CHECK(back.track_torque[0] == doctest::Approx(-d.track_torque[0]));
}

TEST_CASE("edge contact geometry") {
  const double r = 0.34, step = 0.16;
  const double d = climb_start_distance(step, r);
  CHECK(d == doctest::Approx(std::sqrt(r * r - (r - step) * (r - step))));
  CHECK_FALSE(edge_contact(-d - 1e-6, step, r).touching);
  const EdgeContact at = edge_contact(-d + 1e-9, step, r);
  CHECK(at.touching);
  CHECK(at.lift == doctest::Approx(0.0).epsilon(1e-6).scale(1));
  CHECK(edge_contact(0.01, step, r).lift == step);
  CHECK(edge_contact(-0.01, 0.4, r).blocked);
  double prev = -1.0;
  for (double x = -d; x < 0.0; x += d / 50) {
    const EdgeContact c = edge_contact(x, step, r);
    CHECK(c.lift >= prev);
    prev = c.lift;
  }
}

TEST_CASE("peak climb force grows with the step") {
  const RobotModel model = reference_model();
  double prev = 0.0;
  for (double k : {1.0, 2.0, 3.0}) {
    StepScenario sc = scenario_for(model, k * model.track.height);
    double peak = 0.0;
    const double x0 = start_rear_x(model, sc);
    for (double x = x0; x < 0.2; x += 0.002) peak = std::max(peak, rolling_drive(model, sc, x).climb_force);
    CHECK(peak > prev);
    prev = peak;
  }
}

TEST_CASE("a four-track-height step exceeds traction at the rear edge") {
  const RobotModel model = reference_model();
  StepScenario sc = scenario_for(model, 4.0 * model.track.height);
  bool infeasible_rear = false;
  for (double x = start_rear_x(model, sc); x < 0.1; x += 0.002) {
    const RollingDrive d = rolling_drive(model, sc, x);
    if (!d.feasible && d.pose.rear.touching) infeasible_rear = true;
  }
  CHECK(infeasible_rear);
}

TEST_CASE("rolling energy uses track power and static joint heat") {
  const RobotModel model = reference_model();
  StepScenario sc = scenario_for(model, model.track.height);
  const RollingDrive d = rolling_drive(model, sc, -2.0);
  const EnergySample e = rolling_energy(model, d, 0.6);
  for (LegId id : kAllLegs) {
    const auto& t = e[track_actuator(id)];
    CHECK(t.velocity == doctest::Approx(0.6 / model.track.radius()));
    CHECK(t.mechanical == doctest::Approx(d.track_torque[leg_index(id)] * t.velocity));
    for (int j = 0; j < kJointsPerLeg; ++j) CHECK(e[actuator_index(id, j)].mechanical == 0.0);
  }
}
