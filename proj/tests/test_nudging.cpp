#include "nudgenet/integrator.hpp"
#include "nudgenet/nudging.hpp"

#include <doctest.h>

#include <cmath>

using namespace nudgenet;

namespace {

Trajectory attractor_reference(double horizon, double stride, State u0 = (State(3) << 1.0, 2.0, 20.0).finished()) {
  const VectorField f = lorenz63_field({});
  IntegratorConfig cfg{1e-10, 1e-10, 0.1, stride};
  const State spun = integrate_to(f, u0, 0.0, 100.0, cfg);
  return integrate(f, spun, 0.0, horizon, cfg);
}

IntegratorConfig tight(double stride) { return {1e-10, 1e-10, 0.1, stride}; }

}  // namespace

TEST_SUITE("nudging") {

TEST_CASE("observation operator projections") {
  const State s = (State(3) << 7, 8, 9).finished();
  CHECK(ObservationOperator({1}, 3).apply(s) == (Eigen::VectorXd(1) << 7).finished());
  CHECK(ObservationOperator({2}, 3).apply(s) == (Eigen::VectorXd(1) << 8).finished());
  const ObservationOperator even = ObservationOperator::multiples_of(2, 40);
  REQUIRE(even.size() == 20);
  State x(40);
  for (int i = 0; i < 40; ++i) x[i] = i + 1;
  const Eigen::VectorXd o = even.apply(x);
  for (int k = 0; k < 20; ++k) CHECK(o[k] == 2.0 * (k + 1));
  CHECK(ObservationOperator::multiples_of(3, 40).size() == 13);
  CHECK(ObservationOperator::multiples_of(10, 40).indices() == std::vector<int>{10, 20, 30, 40});
  CHECK_THROWS_AS(ObservationOperator({0}, 3), InvalidInput);
  CHECK_THROWS_AS(ObservationOperator({4}, 3), InvalidInput);
  CHECK_THROWS_AS(ObservationOperator({2, 2}, 3), InvalidInput);
}

TEST_CASE("projection idempotence") {
  const ObservationOperator op({2, 5, 7}, 8);
  State s(8);
  for (int i = 0; i < 8; ++i) s[i] = std::cos(1.3 * i);
  CHECK(op.apply(op.embed(op.apply(s))) == op.apply(s));
  const State e = op.embed(op.apply(s));
  CHECK(e[0] == 0.0);
  CHECK(e[1] == s[1]);
}

TEST_CASE("discrete nudged field") {
  NudgingConfig cfg;
  cfg.mu = 30.0;
  cfg.op = ObservationOperator({1}, 3);
  const VectorField f = lorenz63_field({});
  const State w = State::Ones(3);
  const State r = nudged_rhs_discrete(w, (Eigen::VectorXd(1) << 2.0).finished(), f, cfg);
  CHECK(r[0] == -60.0);
  CHECK(r[1] == doctest::Approx(26.0));
  CHECK(r[2] == doctest::Approx(-5.0 / 3.0));
  const State base = lorenz63_rhs(w, {});
  CHECK(nudged_rhs_discrete(w, Eigen::VectorXd::Zero(1), f, cfg) == base);
  cfg.mu = 0.0;
  CHECK(nudged_rhs_discrete(w, (Eigen::VectorXd(1) << 5.0).finished(), f, cfg) == base);
}

TEST_CASE("held-observation field uses the live state") {
  NudgingConfig cfg;
  cfg.mu = 10.0;
  cfg.op = ObservationOperator({2}, 3);
  const State w = (State(3) << 1.0, 3.0, 1.0).finished();
  const State r = nudged_rhs_held(w, (Eigen::VectorXd(1) << 1.0).finished(), lorenz63_field({}), cfg);
  CHECK(r[1] == doctest::Approx(lorenz63_rhs(w, {})[1] - 10.0 * 2.0));
  CHECK(r[0] == lorenz63_rhs(w, {})[0]);
}

TEST_CASE("innovation names round trip") {
  for (Innovation i : {Innovation::frozen_state, Innovation::held_observation}) {
    CHECK(innovation_from_string(to_string(i)) == i);
  }
  CHECK_THROWS_AS(innovation_from_string("sometimes"), InvalidInput);
}

TEST_CASE("starting on the reference stays on it") {
  const Trajectory ref = attractor_reference(3.0, 0.1);
  for (Innovation inn : {Innovation::frozen_state, Innovation::held_observation}) {
    NudgingConfig cfg;
    cfg.op = ObservationOperator({1}, 3);
    cfg.mu = 30.0;
    cfg.delta = 0.1;
    cfg.innovation = inn;
    cfg.w0 = ref.states.front();
    const Trajectory w = run_discrete_nudging(observe(ref, cfg.op), lorenz63_field({}), cfg, tight(0.1));
    for (std::size_t n = 0; n < ref.size(); ++n) {
      if (inn == Innovation::frozen_state) {
        CHECK((w.states[n] - ref.states[n]).squaredNorm() <= 1e-10);
      }
    }
    if (inn == Innovation::held_observation) {
      // The held observation lags the reference inside a window, so the error settles at a floor.
      for (std::size_t n = 0; n < ref.size(); ++n) CHECK((w.states[n] - ref.states[n]).norm() < 20.0);
    }
  }
}

TEST_CASE("x-observed nudging converges at the experimental scale") {
  const Trajectory ref = attractor_reference(10.0, 0.1);
  NudgingConfig cfg;
  cfg.op = ObservationOperator({1}, 3);
  cfg.mu = 30.0;
  cfg.delta = 0.1;
  cfg.innovation = Innovation::held_observation;
  const Trajectory w = run_discrete_nudging(observe(ref, cfg.op), lorenz63_field({}), cfg, tight(0.1));
  REQUIRE(w.size() == ref.size());
  auto V = [&](std::size_t n) { return (w.states[n] - ref.states[n]).squaredNorm(); };
  CHECK(V(100) * 100.0 <= V(0));
  for (std::size_t n = 50; n < ref.size(); ++n) CHECK(V(n) < 400.0);
}

TEST_CASE("frozen innovation contracts for y observations") {
  const Trajectory ref = attractor_reference(10.0, 0.1);
  NudgingConfig cfg;
  cfg.op = ObservationOperator({2}, 3);
  cfg.mu = 10.0;
  cfg.delta = 0.1;
  const Trajectory w = run_discrete_nudging(observe(ref, cfg.op), lorenz63_field({}), cfg, tight(0.1));
  auto V = [&](std::size_t n) { return (w.states[n] - ref.states[n]).squaredNorm(); };
  CHECK(V(50) * 1e3 <= V(0));
  // Geometric decay down to round-off: three decades every 20 windows.
  for (std::size_t n = 0; n + 20 < ref.size(); n += 10) {
    if (V(n) > 1e-16) CHECK(V(n + 20) <= 1e-3 * V(n));
  }
}

TEST_CASE("unforced twin does not synchronise") {
  const Trajectory ref = attractor_reference(10.0, 0.1);
  NudgingConfig cfg;
  cfg.op = ObservationOperator({1}, 3);
  cfg.mu = 0.0;
  cfg.delta = 0.1;
  cfg.w0 = ref.states.front() + State::Constant(3, 1e-3);
  const Trajectory w = run_discrete_nudging(observe(ref, cfg.op), lorenz63_field({}), cfg, tight(0.1));
  CHECK((w.states.back() - ref.states.back()).squaredNorm() > 1.0);
}

TEST_CASE("window solve is pure") {
  NudgingConfig cfg;
  cfg.op = ObservationOperator({1}, 3);
  const State w = (State(3) << 3.0, -1.0, 12.0).finished();
  const Eigen::VectorXd obs = (Eigen::VectorXd(1) << 2.0).finished();
  const VectorField f = lorenz63_field({});
  const State a = solve_nudging_window(f, w, obs, 0.0, 0.1, cfg, tight(0.01));
  const State b = solve_nudging_window(f, w, obs, 0.0, 0.1, cfg, tight(0.01));
  CHECK(a == b);
  CHECK_THROWS_AS(solve_nudging_window(f, w, Eigen::VectorXd::Zero(2), 0.0, 0.1, cfg, tight(0.01)), InvalidInput);
}

TEST_CASE("observation series validation") {
  ObservationSeries s;
  s.op = ObservationOperator({1}, 3);
  s.times = {0.0, 0.1, 0.3};
  s.values.assign(3, Eigen::VectorXd::Zero(1));
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.times = {0.0, 0.1, 0.2};
  CHECK_NOTHROW(s.validate());
  CHECK(s.spacing() == doctest::Approx(0.1));
}

TEST_CASE("continuous nudging at zero error stays put") {
  const Trajectory ref = attractor_reference(1.0, 0.01);
  NudgingConfig cfg;
  cfg.op = ObservationOperator({1}, 3);
  cfg.mu = 50.0;
  cfg.w0 = ref.states.front();
  const Trajectory w = run_continuous_nudging(ref, lorenz63_field({}), cfg, tight(0.01));
  for (std::size_t n = 0; n < ref.size(); ++n) CHECK((w.states[n] - ref.states[n]).squaredNorm() <= 1e-10);
}

TEST_CASE("hermite interpolant is exact at knots and accurate between") {
  const VectorField f = lorenz63_field({});
  const Trajectory ref = attractor_reference(1.0, 0.01);
  const HermiteInterpolant h(ref, f);
  CHECK((h(ref.times[10]) - ref.states[10]).norm() < 1e-12);
  const State mid = integrate_to(f, ref.states[10], ref.times[10], ref.times[10] + 0.005, tight(0.01));
  CHECK((h(ref.times[10] + 0.005) - mid).norm() < 5e-5);
}

}  // TEST_SUITE
