#pragma once

#include "nudgenet/dynamics.hpp"

#include <cstdint>
#include <stdexcept>

namespace nudgenet {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-8;
  double max_step = 0.1;
  /// Spacing of stored samples in `integrate`.
  double dense_output_stride = 0.01;
  std::int64_t max_steps = 200'000'000;

  void validate() const;
};

/// Raised when the step size underflows or the solution stops being finite.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double last_good_time)
      : std::runtime_error(what), last_good_time_(last_good_time) {}
  [[nodiscard]] double last_good_time() const { return last_good_time_; }

 private:
  double last_good_time_;
};

/// Dormand-Prince 5(4) embedded pair with PI step-size control.
///
/// The stepper carries its accepted step size across calls to advance_to, so a
/// long integration split into many short segments costs about the same as a
/// single call. Every call lands exactly on the requested time.
class DormandPrince {
 public:
  DormandPrince(VectorField field, State initial, double t0, IntegratorConfig config);

  /// Integrates forward until time() == t_target exactly.
  void advance_to(double t_target);

  [[nodiscard]] double time() const { return t_; }
  [[nodiscard]] const State& state() const { return y_; }

  /// Replaces the current state (used when a vector field changes between windows).
  void reset(double t, const State& y);

  [[nodiscard]] std::int64_t accepted_steps() const { return accepted_; }
  [[nodiscard]] std::int64_t rejected_steps() const { return rejected_; }
  [[nodiscard]] std::int64_t evaluations() const { return evals_; }

 private:
  double initial_step(double t_target);
  double error_norm(const State& y_new) const;
  void stages(double h);

  VectorField f_;
  IntegratorConfig cfg_;
  double t_;
  State y_;
  State k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y5_, err_;
  bool have_k1_ = false;
  double h_ = 0.0;
  double err_old_ = 1e-4;
  std::int64_t accepted_ = 0, rejected_ = 0, evals_ = 0;
};

/// Integrates from t0 to t1 and stores states at t0 + k * stride plus t1.
/// Every stored sample is an exact step landing, not an interpolant.
Trajectory integrate(const VectorField& field, const State& initial, double t0, double t1,
                     const IntegratorConfig& config);

/// Final state only.
State integrate_to(const VectorField& field, const State& initial, double t0, double t1,
                   const IntegratorConfig& config);

/// Fixed-step Dormand-Prince (fifth-order solution), used for order checks.
State integrate_fixed_step(const VectorField& field, const State& initial, double t0, double t1,
                           int n_steps);

/// Sample times used by `integrate`: t0 + k * stride for t < t1, then t1.
std::vector<double> sample_grid(double t0, double t1, double stride);

}  // namespace nudgenet
