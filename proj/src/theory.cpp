#include "nudgenet/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nudgenet {

std::string to_string(TheoryCase c) {
  switch (c) {
    case TheoryCase::continuous_x: return "continuous-x";
    case TheoryCase::discrete_x: return "discrete-x";
    case TheoryCase::discrete_yz: return "discrete-yz";
  }
  return "unknown";
}

TheoryCase theory_case_from_string(const std::string& s) {
  if (s == "continuous-x" || s == "continuous_x") return TheoryCase::continuous_x;
  if (s == "discrete-x" || s == "discrete_x") return TheoryCase::discrete_x;
  if (s == "discrete-yz" || s == "discrete_yz") return TheoryCase::discrete_yz;
  throw InvalidInput("unknown theory case '" + s + "'");
}

double contraction_factor(double c, double delta) {
  return (1.0 + (2.0 * c - 1.0) * std::exp(-c * delta)) / (2.0 * c);
}

namespace {

double mu_min_for(const Lorenz63Params& p, TheoryCase which, double K) {
  const double rs = p.rho + p.sigma;
  switch (which) {
    case TheoryCase::continuous_x:
      return std::max(2.0, 0.5 + rs * rs - p.sigma + K + K / (2.0 * p.beta));
    case TheoryCase::discrete_x:
      return 2.0 * rs * rs - 2.0 * p.sigma + 2.0 * K + K / p.beta;
    case TheoryCase::discrete_yz:
      return 4.0 * std::max(rs * rs / p.sigma + K - 1.0, K - p.beta);
  }
  return 0.0;
}

}  // namespace

double theory_delta_max(const Lorenz63Params& p, TheoryCase which, double mu) {
  const double K = lorenz63_attractor_bound(p);
  switch (which) {
    case TheoryCase::continuous_x:
      return std::numeric_limits<double>::infinity();
    case TheoryCase::discrete_x:
      return std::min({1.0 / (2.0 * mu), 1.0 / (64.0 * (p.sigma + mu) * (p.sigma + mu)),
                       1.0 / (32.0 * mu * p.sigma * p.sigma)});
    case TheoryCase::discrete_yz: {
      const double Kt = 5.0 * K;
      const double a = p.rho + std::sqrt(K);
      return std::min({p.sigma / (2.0 * mu * (a * a + K)), 1.0 / ((1.0 + mu) * (1.0 + mu) + Kt),
                       1.0 / ((p.beta + mu) * (p.beta + mu) + Kt)}) /
             64.0;
    }
  }
  return 0.0;
}

TheoryBounds theory_bounds(const Lorenz63Params& p, TheoryCase which, double mu, double delta) {
  if (!(mu > 0.0) || !(delta > 0.0)) {
    throw InvalidInput("theory_bounds: mu and delta must be positive");
  }
  TheoryBounds b;
  b.which = which;
  b.K = lorenz63_attractor_bound(p);
  b.K_tilde = 5.0 * b.K;
  b.mu = mu;
  b.delta = delta;
  b.mu_min = mu_min_for(p, which, b.K);
  b.delta_max = theory_delta_max(p, which, mu);
  b.mu_admissible = mu >= b.mu_min;
  b.delta_admissible = delta <= b.delta_max;
  switch (which) {
    case TheoryCase::continuous_x:
      b.c = std::min(1.0, p.beta);
      b.gamma = std::exp(-b.c * delta);
      break;
    case TheoryCase::discrete_x:
      b.c = std::min({mu / 2.0, 1.0, p.beta});
      b.gamma = contraction_factor(b.c, delta);
      break;
    case TheoryCase::discrete_yz:
      b.c = std::min(p.sigma / 2.0, mu);
      b.gamma = contraction_factor(b.c, delta);
      break;
  }
  return b;
}

}  // namespace nudgenet
