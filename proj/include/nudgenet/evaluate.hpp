#pragma once

#include "nudgenet/assimilate.hpp"
#include "nudgenet/integrator.hpp"
#include "nudgenet/theory.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace nudgenet {

/// Spatio-temporal RMSE over runs, times in [k0_time, horizon] and components.
///
/// `rmse` averages the squared deviation over components as well;
/// `rmse_state` averages the squared Euclidean norm of the state error over
/// runs and times only, so rmse_state = sqrt(#components) * rmse.
struct RmseReport {
  double rmse = 0.0;
  double rmse_state = 0.0;
  std::size_t n_runs = 0;
  double k0_time = 0.0;
  double horizon_time = 0.0;
  std::string method;
  /// Components included (1-based); all components when `observed_only` is false.
  std::vector<int> components;
  bool observed_only = false;
  std::size_t n_terms = 0;
  /// per_run[n][k]: squared deviation summed over components at the k-th time in the window.
  std::vector<std::vector<double>> per_run;
  std::vector<double> window_times;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// `components` restricts the sum (1-based); empty means every component.
/// Throws InvalidInput when runs and refs are not aligned on the window.
RmseReport rmse(const std::vector<AssimilationRun>& runs, const std::vector<Trajectory>& refs,
                double k0_time, double horizon, const std::vector<int>& components = {});

struct TimeSeries {
  std::vector<double> times;
  std::vector<double> values;
};

/// V(t) = |w(t) - u(t)|^2 on a shared sampling grid.
TimeSeries error_energy(const Trajectory& run, const Trajectory& ref);
TimeSeries error_energy(const AssimilationRun& run, const Trajectory& ref);
std::string time_series_csv(const TimeSeries& s, const std::string& value_name = "V");

struct DecayFit {
  double fitted_rate = 0.0;
  double theoretical_rate = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;  ///< last time actually used
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

/// Least-squares line through log V(t) on [t_start, t_end]; fitted_rate = -slope.
/// The window is cut at the first V < 1e-24. Needs at least three points.
DecayFit fit_decay(const TimeSeries& series, double t_start, double t_end);

struct VerifyOptions {
  int n_refs = 10;
  /// Discrete cases: windows checked per reference.
  int n_windows = 100;
  /// Continuous case: checked horizon and sampling stride.
  double duration = 3.0;
  double sample_stride = 0.01;
  /// Allowed relative excess over the theoretical envelope.
  double slack = 0.01;
  std::uint64_t seed = 7;
  double spin_up = 100.0;
  IntegratorConfig integ = {1e-10, 1e-10, 0.1, 0.01, 200'000'000};
};

struct VerificationReport {
  TheoryBounds bounds;
  bool hypotheses_satisfied = false;
  bool passed = false;
  int n_refs = 0;
  int n_windows = 0;
  /// Continuous: max over refs and samples of V(t) / (e^{-ct} V(0)).
  double max_envelope_ratio = 0.0;
  /// Discrete: max over refs and windows of V(t_{n+1}) / V(t_n).
  double max_window_ratio = 0.0;
  int violations = 0;
  /// Largest |w(t)|^2 of the nudged solution over all runs.
  double max_nudged_norm_sq = 0.0;
  /// Observed decay rate (continuous case, fit on [0.5, duration]); 0 otherwise.
  double fitted_rate = 0.0;
  std::optional<std::size_t> failure_window;
  std::string failure;

  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string summary() const;
};

/// Runs the nudging experiment matching the theorem and checks its conclusion:
/// the envelope e^{-ct} V(0) for continuous_x, per-window V(t_{n+1}) <= gamma V(t_n)
/// for the discrete cases, and additionally |w|^2 <= 5K for discrete_yz.
/// Inadmissible (mu, delta) still run; the report then marks the hypotheses as
/// unsatisfied and `passed` only reflects the observed behaviour.
VerificationReport verify_theorem(TheoryCase which, const Lorenz63Params& params, double mu,
                                  double delta, const VerifyOptions& opts = {});

/// Aligned text table: one row per method, one column per case.
struct ResultTable {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::pair<std::string, std::vector<std::optional<double>>>> rows;

  [[nodiscard]] std::string to_text() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

}  // namespace nudgenet
