#pragma once

#include "nudgenet/model.hpp"
#include "nudgenet/nudging.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace nudgenet {

enum class AssimMethod { nudging, dnn_full, dnn_reduced };

std::string to_string(AssimMethod m);
AssimMethod assim_method_from_string(const std::string& s);

/// Assimilated states, one per observation time t_0 .. t_K. The state at t_K
/// is produced from the observation at t_{K-1}; the last observation itself is
/// only used for evaluation.
struct AssimilationRun {
  std::vector<double> times;
  std::vector<State> states;
  AssimMethod method = AssimMethod::nudging;
  /// Model hash for DNN runs, "mu=<value>" for nudging.
  std::string provenance;

  [[nodiscard]] std::size_t size() const { return states.size(); }
  [[nodiscard]] Trajectory trajectory() const;
};

/// Raised when an assimilated state leaves the divergence guard or becomes
/// non-finite. `step()` is the index of the offending state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  [[nodiscard]] std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Any component with magnitude above this aborts a run.
inline constexpr double kDivergenceLimit = 1e4;

/// (w(t_k), I_M u(t_k)) -> w(t_{k+1})
using OneStepMap = std::function<State(const State& w, const Eigen::VectorXd& observation)>;

/// Iterates a one-step map over the observations starting from w0 (empty = zeros).
AssimilationRun assimilate_map(const OneStepMap& step, const ObservationSeries& observations,
                               const State& w0, AssimMethod method, const std::string& provenance);

/// Full-state surrogate: input [w; I_M u], output w at the next observation time.
AssimilationRun assimilate_dnn(const Surrogate& model, const ObservationSeries& observations,
                               const State& w0 = {});

/// Reduced input of component i (1-based): w on its stencil then the
/// observations that fall inside the stencil.
Eigen::VectorXd reduced_input(const State& w, const Eigen::VectorXd& observation, int component,
                              const ObservationOperator& op);

/// Lorenz 96 reduced family: models[i-1] predicts component i from its stencil.
AssimilationRun assimilate_dnn_reduced(const std::vector<Surrogate>& models,
                                       const ObservationSeries& observations, const State& w0 = {});

/// Discrete nudging repackaged at the observation times.
AssimilationRun assimilate_nudging(const ObservationSeries& observations, const VectorField& base_rhs,
                                   const NudgingConfig& config, const IntegratorConfig& integ);

/// Stable identity of a model (hash of its saved bytes).
std::string model_hash(const Surrogate& model);
std::string family_hash(const std::vector<Surrogate>& models);

/// CSV `t,w1..wd` plus a JSON sidecar (`<path>.json`) holding `meta` and the method.
void save_run(const std::filesystem::path& csv_path, const AssimilationRun& run,
              const nlohmann::json& meta);
AssimilationRun load_run(const std::filesystem::path& csv_path);

}  // namespace nudgenet
