#pragma once

#include "nudgenet/dynamics.hpp"
#include "nudgenet/integrator.hpp"

#include <string>
#include <vector>

namespace nudgenet {

/// Interpolant I_M realised as a projection onto selected state components.
/// Indices are 1-based, matching x_1..x_d.
class ObservationOperator {
 public:
  ObservationOperator() = default;
  ObservationOperator(std::vector<int> observed_indices, int state_dim);

  /// Components k*step for k = 1, 2, ... up to state_dim (e.g. step 2 gives the
  /// even components, step 10 on d = 40 gives {10, 20, 30, 40}).
  static ObservationOperator multiples_of(int step, int state_dim);

  [[nodiscard]] Eigen::VectorXd apply(const State& state) const;
  /// Zero-filled state whose observed components are `obs`.
  [[nodiscard]] State embed(const Eigen::VectorXd& obs) const;

  [[nodiscard]] const std::vector<int>& indices() const { return indices_; }
  [[nodiscard]] int size() const { return static_cast<int>(indices_.size()); }
  [[nodiscard]] int state_dim() const { return state_dim_; }
  [[nodiscard]] bool observes(int one_based_index) const;

  friend bool operator==(const ObservationOperator&, const ObservationOperator&) = default;

 private:
  std::vector<int> indices_;
  int state_dim_ = 0;
};

/// Discrete-in-time observations I_M(u(t_n)) at uniformly spaced times.
struct ObservationSeries {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  ObservationOperator op;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  /// Constant spacing delta; zero when fewer than two observations.
  [[nodiscard]] double spacing() const;
  /// Checks lengths, strict monotonicity and uniform spacing to 1e-12 relative.
  void validate() const;
};

/// Observe every sample of a reference trajectory.
ObservationSeries observe(const Trajectory& reference, const ObservationOperator& op);

/// How the feedback term is formed inside an observation window [t_n, t_{n+1}].
enum class Innovation {
  /// -mu (I_M w(t_n) - I_M u(t_n)): the whole innovation is held fixed.
  frozen_state,
  /// -mu (I_M w(t) - I_M u(t_n)): the observation is held, the state is live.
  held_observation,
};

std::string to_string(Innovation i);
Innovation innovation_from_string(const std::string& s);

struct NudgingConfig {
  double mu = 30.0;
  double delta = 0.1;
  ObservationOperator op;
  /// Empty means the zero state.
  State w0;
  Innovation innovation = Innovation::frozen_state;

  void validate() const;
  [[nodiscard]] State initial_state() const;
};

/// f(w) with -mu * innovation added to the observed components, where the
/// innovation I_M(w(t_n)) - I_M(u(t_n)) is held fixed over the window.
State nudged_rhs_discrete(const State& state, const Eigen::VectorXd& frozen_innovation,
                          const VectorField& base_rhs, const NudgingConfig& config, double t = 0.0);

/// f(w) - mu (I_M w - observation) on the observed components.
State nudged_rhs_held(const State& state, const Eigen::VectorXd& observation,
                      const VectorField& base_rhs, const NudgingConfig& config, double t = 0.0);

/// Solves one nudging window [t_start, t_end] from w_start with observation
/// I_M(u(t_start)), forming the feedback as config.innovation says. Each window starts a fresh integrator so the result is a
/// pure function of its arguments. When `samples` is non-null, states at the
/// integrator's stride inside the window are appended (t_start excluded,
/// t_end included).
State solve_nudging_window(const VectorField& base_rhs, const State& w_start,
                           const Eigen::VectorXd& observation, double t_start, double t_end,
                           const NudgingConfig& config, const IntegratorConfig& integ,
                           Trajectory* samples = nullptr);

/// Piecewise nudging over all observation windows. The result starts at
/// (t_0, w0) and contains every window endpoint plus interior stride samples.
Trajectory run_discrete_nudging(const ObservationSeries& observations, const VectorField& base_rhs,
                                const NudgingConfig& config, const IntegratorConfig& integ);

/// Raised by run_discrete_nudging; carries the failing window.
class WindowFailure : public IntegrationError {
 public:
  WindowFailure(const std::string& what, double last_good_time, std::size_t window)
      : IntegrationError(what, last_good_time), window_(window) {}
  [[nodiscard]] std::size_t window() const { return window_; }

 private:
  std::size_t window_;
};

/// Piecewise-cubic Hermite interpolant of a trajectory using the vector field
/// at the knots (fourth-order accurate).
class HermiteInterpolant {
 public:
  HermiteInterpolant(const Trajectory& reference, const VectorField& field);
  [[nodiscard]] State operator()(double t) const;

 private:
  const Trajectory* ref_;
  std::vector<State> slopes_;
};

/// Continuous-in-time nudging against a stored reference. Output is sampled at
/// the reference's own times.
Trajectory run_continuous_nudging(const Trajectory& reference, const VectorField& base_rhs,
                                  const NudgingConfig& config, const IntegratorConfig& integ);

}  // namespace nudgenet
