#include "nudgenet/evaluate.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace nudgenet;

namespace {

Trajectory line(int n, double dt, const State& base) {
  Trajectory t;
  for (int k = 0; k < n; ++k) t.push_back(k * dt, base + State::Constant(base.size(), 0.1 * k));
  return t;
}

AssimilationRun as_run(const Trajectory& t) {
  AssimilationRun r;
  r.times = t.times;
  r.states = t.states;
  return r;
}

}  // namespace

TEST_SUITE("evaluate") {

TEST_CASE("identical runs give zero") {
  const Trajectory ref = line(101, 0.1, State::Ones(3));
  const RmseReport r = rmse({as_run(ref)}, {ref}, 5.0, 10.0);
  CHECK(r.rmse == 0.0);
  CHECK(r.rmse_state == 0.0);
  CHECK(r.n_terms == 153);
}

TEST_CASE("single deviation hand value") {
  Trajectory ref;
  ref.push_back(0.0, State::Zero(3));
  Trajectory run = ref;
  run.states[0] << 3.0, 4.0, 0.0;
  const RmseReport r = rmse({as_run(run)}, {ref}, 0.0, 0.0);
  CHECK(r.rmse == doctest::Approx(std::sqrt(25.0 / 3.0)).epsilon(1e-15));
  CHECK(r.rmse_state == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("rmse_state is sqrt(d) times rmse and components restrict the sum") {
  const Trajectory ref = line(21, 0.5, State::Zero(3));
  Trajectory run = ref;
  for (std::size_t k = 0; k < run.size(); ++k) run.states[k] += (State(3) << 1.0, -2.0, 0.5 * k).finished();
  const RmseReport r = rmse({as_run(run)}, {ref}, 2.0, 8.0);
  CHECK(r.rmse_state == doctest::Approx(std::sqrt(3.0) * r.rmse).epsilon(1e-14));
  const RmseReport x_only = rmse({as_run(run)}, {ref}, 2.0, 8.0, {1});
  CHECK(x_only.rmse == doctest::Approx(1.0));
  CHECK(x_only.observed_only);
  CHECK_THROWS_AS(rmse({as_run(run)}, {ref}, 2.0, 8.0, {4}), InvalidInput);
}

TEST_CASE("permutation invariance") {
  std::vector<Trajectory> refs;
  std::vector<AssimilationRun> runs;
  for (int n = 0; n < 5; ++n) {
    refs.push_back(line(101, 0.1, State::Constant(3, n)));
    Trajectory r = refs.back();
    for (auto& s : r.states) s[n % 3] += 0.3 * (n + 1);
    runs.push_back(as_run(r));
  }
  const double a = rmse(runs, refs, 5.0, 10.0).rmse;
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<Trajectory> refs_p;
  std::vector<AssimilationRun> runs_p;
  for (auto i : perm) {
    refs_p.push_back(refs[i]);
    runs_p.push_back(runs[i]);
  }
  CHECK(rmse(runs_p, refs_p, 5.0, 10.0).rmse == doctest::Approx(a).epsilon(1e-14));
}

TEST_CASE("misaligned inputs are rejected") {
  const Trajectory ref = line(11, 0.1, State::Zero(3));
  CHECK_THROWS_AS(rmse({}, {}, 0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(rmse({as_run(ref)}, {ref, ref}, 0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(rmse({as_run(ref)}, {ref}, 0.0, 5.0), InvalidInput);
}

TEST_CASE("error energy") {
  const Trajectory ref = line(11, 0.1, State::Zero(3));
  const TimeSeries zero = error_energy(ref, ref);
  CHECK(std::all_of(zero.values.begin(), zero.values.end(), [](double v) { return v == 0.0; }));
  Trajectory shifted = ref;
  for (auto& s : shifted.states) s += (State(3) << 1.0, 2.0, 2.0).finished();
  const TimeSeries c = error_energy(shifted, ref);
  for (double v : c.values) CHECK(v == doctest::Approx(9.0));
  CHECK(time_series_csv(c).rfind("t,V\n", 0) == 0);
}

TEST_CASE("decay fit recovers exponential rates") {
  for (double c : {0.1, 1.0, 10.0, 2.0}) {
    TimeSeries s;
    for (int k = 0; k <= 300; ++k) {
      s.times.push_back(0.01 * k);
      s.values.push_back(std::exp(-c * 0.01 * k));
    }
    const DecayFit f = fit_decay(s, 0.0, 3.0);
    CHECK(std::abs(f.fitted_rate - c) <= 1e-8);
    CHECK(f.r_squared == doctest::Approx(1.0));
  }
  TimeSeries flat{{0.0, 1.0, 2.0, 3.0}, {4.0, 4.0, 4.0, 4.0}};
  CHECK(fit_decay(flat, 0.0, 3.0).fitted_rate == doctest::Approx(0.0));
  TimeSeries tiny{{0.0, 1.0}, {1.0, 0.5}};
  CHECK_THROWS_AS(fit_decay(tiny, 0.0, 1.0), InvalidInput);
}

TEST_CASE("result table") {
  ResultTable t;
  t.title = "RMSE";
  t.columns = {"x-obs", "y-obs"};
  t.rows = {{"Nudging", {6.0, 5.8}}, {"DNN", {6.4, std::nullopt}}};
  const std::string s = t.to_text();
  CHECK(s.find("Nudging") != std::string::npos);
  CHECK(s.find("x-obs") != std::string::npos);
  CHECK(t.to_json()["rows"].size() == 2);
}

}  // TEST_SUITE
