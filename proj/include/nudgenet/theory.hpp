#pragma once

#include "nudgenet/dynamics.hpp"

#include <string>

namespace nudgenet {

/// Which convergence result the constants belong to.
enum class TheoryCase {
  continuous_x,  ///< x observed continuously in time
  discrete_x,    ///< x observed at spacing delta
  discrete_yz,   ///< y and z observed at spacing delta
};

std::string to_string(TheoryCase c);
TheoryCase theory_case_from_string(const std::string& s);

/// Constants of the Lorenz 63 nudging convergence results.
///
/// For the discrete cases `gamma` is the per-window contraction factor
/// (1 / 2c)(1 + (2c - 1) e^{-c delta}). For continuous_x there are no windows;
/// `gamma` is then e^{-c delta}, the envelope's decay over one spacing, and
/// `delta_max` is +inf.
struct TheoryBounds {
  TheoryCase which = TheoryCase::continuous_x;
  double K = 0.0;        ///< attractor bound on x^2 + y^2 + z^2
  double K_tilde = 0.0;  ///< 5K, bound on the nudged solution (yz case)
  double mu_min = 0.0;
  double delta_max = 0.0;
  double c = 0.0;
  double gamma = 0.0;
  double mu = 0.0;
  double delta = 0.0;
  bool mu_admissible = false;
  bool delta_admissible = false;

  [[nodiscard]] bool admissible() const { return mu_admissible && delta_admissible; }
};

/// Throws InvalidInput if beta <= 1 (K undefined) or mu, delta are not positive.
TheoryBounds theory_bounds(const Lorenz63Params& params, TheoryCase which, double mu, double delta);

/// Largest admissible spacing for the given mu (delta-independent part of theory_bounds).
double theory_delta_max(const Lorenz63Params& params, TheoryCase which, double mu);

/// Per-window contraction factor (1 / 2c)(1 + (2c - 1) e^{-c delta}).
double contraction_factor(double c, double delta);

}  // namespace nudgenet
