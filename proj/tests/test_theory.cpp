#include "nudgenet/evaluate.hpp"
#include "nudgenet/theory.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace nudgenet;

namespace {

// Independent evaluation of the published constants.
struct Oracle {
  double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
  double K() const { return beta * beta * (rho + sigma) * (rho + sigma) / (4.0 * (beta - 1.0)); }
  double mu_min_cx() const {
    return std::max(2.0, 0.5 + (rho + sigma) * (rho + sigma) - sigma + K() + K() / (2.0 * beta));
  }
};

}  // namespace

TEST_SUITE("theory") {

TEST_CASE("constants for the standard parameters") {
  const Oracle o;
  const Lorenz63Params p;
  const TheoryBounds b = theory_bounds(p, TheoryCase::continuous_x, 4000.0, 0.1);
  CHECK(b.K == doctest::Approx(o.K()).epsilon(1e-14));
  CHECK(std::abs(b.K - 1540.2667) < 1e-3);
  CHECK(std::abs(b.mu_min - 3263.57) <= 0.01);
  CHECK(b.mu_min == doctest::Approx(o.mu_min_cx()).epsilon(1e-14));
  CHECK(b.c == doctest::Approx(1.0));
  CHECK(b.mu_admissible);
  const TheoryBounds yz = theory_bounds(p, TheoryCase::discrete_yz, 100.0, 1e-6);
  CHECK(std::abs(yz.K_tilde - 7701.33) <= 0.01);
  CHECK(yz.K_tilde == doctest::Approx(5.0 * o.K()).epsilon(1e-14));
}

TEST_CASE("contraction factor") {
  // (1/2c)(1 + (2c-1) e^{-c delta})
  for (double c : {0.5, 1.0, 8.0 / 3.0}) {
    for (double d : {1e-6, 1e-3, 0.1}) {
      CHECK(contraction_factor(c, d) == doctest::Approx((1.0 + (2.0 * c - 1.0) * std::exp(-c * d)) / (2.0 * c)));
    }
  }
  CHECK(contraction_factor(1.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("gamma below one on an admissible grid") {
  const Lorenz63Params p;
  int checked = 0;
  for (TheoryCase tc : {TheoryCase::discrete_x, TheoryCase::discrete_yz}) {
    const double mu_min = theory_bounds(p, tc, 1.0, 1.0).mu_min;
    for (int i = 0; i < 10; ++i) {
      const double mu = mu_min * (1.0 + 0.2 * i);
      const double dmax = theory_delta_max(p, tc, mu);
      for (int j = 1; j <= 5; ++j) {
        const TheoryBounds b = theory_bounds(p, tc, mu, j == 5 ? dmax : dmax * j / 5.0);
        REQUIRE(b.admissible());
        CHECK(b.gamma < 1.0);
        CHECK(b.gamma > 0.0);
        ++checked;
      }
    }
  }
  CHECK(checked == 100);
}

TEST_CASE("experimental parameters are outside the theorem") {
  const TheoryBounds b = theory_bounds(Lorenz63Params{}, TheoryCase::discrete_x, 30.0, 0.1);
  CHECK_FALSE(b.admissible());
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(theory_bounds(Lorenz63Params{10, 28, 1.0}, TheoryCase::discrete_x, 1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(theory_bounds(Lorenz63Params{}, TheoryCase::discrete_x, -1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(theory_case_from_string("diagonal"), InvalidInput);
  CHECK(theory_case_from_string("discrete-yz") == TheoryCase::discrete_yz);
}

TEST_CASE("verify: inadmissible discrete_x run is flagged") {
  VerifyOptions o;
  o.n_refs = 2;
  o.n_windows = 20;
  const VerificationReport r = verify_theorem(TheoryCase::discrete_x, Lorenz63Params{}, 30.0, 0.1, o);
  CHECK_FALSE(r.hypotheses_satisfied);
  CHECK(r.n_windows == 20);
  CHECK(r.max_window_ratio > 0.0);
}

TEST_CASE("verify: continuous envelope and decay rate") {
  VerifyOptions o;
  o.n_refs = 3;
  const double mu = 1.05 * theory_bounds(Lorenz63Params{}, TheoryCase::continuous_x, 1.0, 1.0).mu_min;
  const VerificationReport r = verify_theorem(TheoryCase::continuous_x, Lorenz63Params{}, mu, 0.01, o);
  CHECK(r.hypotheses_satisfied);
  CHECK(r.passed);
  CHECK(r.max_envelope_ratio <= 1.01);
  CHECK(r.fitted_rate >= 1.0);
}

}  // TEST_SUITE
