#include "nudgenet/nudging.hpp"

#include <algorithm>
#include <cmath>

namespace nudgenet {

ObservationOperator::ObservationOperator(std::vector<int> observed_indices, int state_dim)
    : indices_(std::move(observed_indices)), state_dim_(state_dim) {
  if (state_dim_ <= 0) {
    throw InvalidInput("observation operator: state_dim must be positive");
  }
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
    throw InvalidInput("observation operator: duplicate index");
  }
  for (int i : indices_) {
    if (i < 1 || i > state_dim_) {
      throw InvalidInput("observation operator: index " + std::to_string(i) +
                         " outside [1, " + std::to_string(state_dim_) + "]");
    }
  }
}

ObservationOperator ObservationOperator::multiples_of(int step, int state_dim) {
  if (step <= 0) {
    throw InvalidInput("observation operator: step must be positive");
  }
  std::vector<int> idx;
  for (int i = step; i <= state_dim; i += step) {
    idx.push_back(i);
  }
  return ObservationOperator(std::move(idx), state_dim);
}

Eigen::VectorXd ObservationOperator::apply(const State& state) const {
  if (state.size() != state_dim_) {
    throw InvalidInput("apply_observation: state has dimension " + std::to_string(state.size()) +
                       ", operator expects " + std::to_string(state_dim_));
  }
  Eigen::VectorXd out(size());
  for (int j = 0; j < size(); ++j) {
    out[j] = state[indices_[static_cast<std::size_t>(j)] - 1];
  }
  return out;
}

State ObservationOperator::embed(const Eigen::VectorXd& obs) const {
  if (obs.size() != size()) {
    throw InvalidInput("embed: observation length mismatch");
  }
  State s = State::Zero(state_dim_);
  for (int j = 0; j < size(); ++j) {
    s[indices_[static_cast<std::size_t>(j)] - 1] = obs[j];
  }
  return s;
}

bool ObservationOperator::observes(int one_based_index) const {
  return std::binary_search(indices_.begin(), indices_.end(), one_based_index);
}

double ObservationSeries::spacing() const {
  return times.size() < 2 ? 0.0 : times[1] - times[0];
}

void ObservationSeries::validate() const {
  if (times.size() != values.size()) {
    throw InvalidInput("observations: times and values differ in length");
  }
  for (const auto& v : values) {
    if (v.size() != op.size()) {
      throw InvalidInput("observations: value length does not match operator");
    }
  }
  if (times.size() < 2) {
    return;
  }
  const double delta = spacing();
  if (!(delta > 0.0)) {
    throw InvalidInput("observations: times must increase strictly");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double gap = times[k] - times[k - 1];
    // Relative to the elapsed time, since t_k = t_0 + k * delta accumulates rounding.
    const double scale = std::max(delta, std::abs(times[k]));
    if (std::abs(gap - delta) > 1e-12 * scale) {
      throw InvalidInput("observations: spacing is not uniform (gaps are not supported)");
    }
  }
}

ObservationSeries observe(const Trajectory& reference, const ObservationOperator& op) {
  ObservationSeries obs;
  obs.op = op;
  obs.times = reference.times;
  obs.values.reserve(reference.size());
  for (const auto& s : reference.states) {
    obs.values.push_back(op.apply(s));
  }
  return obs;
}

void NudgingConfig::validate() const {
  if (!(mu >= 0.0) || !(delta > 0.0)) {
    throw InvalidInput("nudging: need mu >= 0 and delta > 0");
  }
  if (w0.size() != 0 && w0.size() != op.state_dim()) {
    throw InvalidInput("nudging: w0 dimension does not match operator");
  }
}

State NudgingConfig::initial_state() const {
  return w0.size() == 0 ? State::Zero(op.state_dim()) : w0;
}

State nudged_rhs_discrete(const State& state, const Eigen::VectorXd& frozen_innovation,
                          const VectorField& base_rhs, const NudgingConfig& config, double t) {
  if (frozen_innovation.size() != config.op.size()) {
    throw InvalidInput("nudged_rhs_discrete: innovation length does not match operator");
  }
  State out(state.size());
  base_rhs(t, state, out);
  const auto& idx = config.op.indices();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out[idx[j] - 1] -= config.mu * frozen_innovation[static_cast<Eigen::Index>(j)];
  }
  return out;
}

std::string to_string(Innovation i) {
  return i == Innovation::frozen_state ? "frozen_state" : "held_observation";
}

Innovation innovation_from_string(const std::string& s) {
  if (s == "frozen_state") return Innovation::frozen_state;
  if (s == "held_observation") return Innovation::held_observation;
  throw InvalidInput("unknown innovation '" + s + "' (expected frozen_state or held_observation)");
}

State nudged_rhs_held(const State& state, const Eigen::VectorXd& observation,
                      const VectorField& base_rhs, const NudgingConfig& config, double t) {
  if (observation.size() != config.op.size()) {
    throw InvalidInput("nudged_rhs_held: observation length does not match operator");
  }
  State out(state.size());
  base_rhs(t, state, out);
  const auto& idx = config.op.indices();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto i = idx[j] - 1;
    out[i] -= config.mu * (state[i] - observation[static_cast<Eigen::Index>(j)]);
  }
  return out;
}

State solve_nudging_window(const VectorField& base_rhs, const State& w_start,
                           const Eigen::VectorXd& observation, double t_start, double t_end,
                           const NudgingConfig& config, const IntegratorConfig& integ,
                           Trajectory* samples) {
  if (observation.size() != config.op.size()) {
    throw InvalidInput("nudging window: observation length does not match operator");
  }
  VectorField field;
  if (config.innovation == Innovation::frozen_state) {
    // -mu * (I_M w(t_n) - I_M u(t_n)), embedded in state space.
    const State forcing = -config.mu * config.op.embed(config.op.apply(w_start) - observation);
    field = [&base_rhs, forcing](double t, const State& y, State& dydt) {
      base_rhs(t, y, dydt);
      dydt += forcing;
    };
  } else {
    const double mu = config.mu;
    const std::vector<int> idx = config.op.indices();
    const Eigen::VectorXd obs = observation;
    field = [&base_rhs, mu, idx, obs](double t, const State& y, State& dydt) {
      base_rhs(t, y, dydt);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto i = idx[j] - 1;
        dydt[i] -= mu * (y[i] - obs[static_cast<Eigen::Index>(j)]);
      }
    };
  }
  DormandPrince stepper(field, w_start, t_start, integ);
  if (samples != nullptr) {
    const auto grid = sample_grid(t_start, t_end, integ.dense_output_stride);
    for (std::size_t k = 1; k < grid.size(); ++k) {
      stepper.advance_to(grid[k]);
      samples->push_back(grid[k], stepper.state());
    }
  } else {
    stepper.advance_to(t_end);
  }
  return stepper.state();
}

Trajectory run_discrete_nudging(const ObservationSeries& observations, const VectorField& base_rhs,
                                const NudgingConfig& config, const IntegratorConfig& integ) {
  observations.validate();
  config.validate();
  if (observations.size() == 0) {
    throw InvalidInput("run_discrete_nudging: no observations");
  }
  if (!(observations.op == config.op)) {
    throw InvalidInput("run_discrete_nudging: observation operator differs from config");
  }
  const double spacing = observations.spacing();
  if (observations.size() >= 2 && std::abs(spacing - config.delta) > 1e-9 * config.delta) {
    throw InvalidInput("run_discrete_nudging: config delta does not match observation spacing");
  }
  Trajectory out;
  State w = config.initial_state();
  out.push_back(observations.times.front(), w);
  for (std::size_t n = 0; n + 1 < observations.size(); ++n) {
    try {
      w = solve_nudging_window(base_rhs, w, observations.values[n], observations.times[n],
                               observations.times[n + 1], config, integ, &out);
    } catch (const IntegrationError& e) {
      throw WindowFailure(std::string(e.what()) + " (window " + std::to_string(n) + ")",
                          e.last_good_time(), n);
    }
  }
  return out;
}

HermiteInterpolant::HermiteInterpolant(const Trajectory& reference, const VectorField& field)
    : ref_(&reference) {
  if (reference.size() < 2) {
    throw InvalidInput("interpolant: need at least two samples");
  }
  slopes_.reserve(reference.size());
  for (std::size_t k = 0; k < reference.size(); ++k) {
    State d(reference.states[k].size());
    field(reference.times[k], reference.states[k], d);
    slopes_.push_back(std::move(d));
  }
}

State HermiteInterpolant::operator()(double t) const {
  const auto& ts = ref_->times;
  if (t < ts.front() - 1e-12 || t > ts.back() + 1e-12) {
    throw InvalidInput("interpolant: time outside reference span");
  }
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t k = it == ts.begin() ? 0 : static_cast<std::size_t>(it - ts.begin()) - 1;
  k = std::min(k, ts.size() - 2);
  const double h = ts[k + 1] - ts[k];
  const double s = (t - ts[k]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * ref_->states[k] + h10 * h * slopes_[k] + h01 * ref_->states[k + 1] +
         h11 * h * slopes_[k + 1];
}

Trajectory run_continuous_nudging(const Trajectory& reference, const VectorField& base_rhs,
                                  const NudgingConfig& config, const IntegratorConfig& integ) {
  reference.validate();
  config.validate();
  if (reference.dim() != config.op.state_dim()) {
    throw InvalidInput("run_continuous_nudging: reference dimension does not match operator");
  }
  const HermiteInterpolant u(reference, base_rhs);
  const auto& idx = config.op.indices();
  const double mu = config.mu;
  VectorField field = [&](double t, const State& w, State& dydt) {
    base_rhs(t, w, dydt);
    const State ut = u(t);
    for (int i : idx) {
      dydt[i - 1] -= mu * (w[i - 1] - ut[i - 1]);
    }
  };
  DormandPrince stepper(field, config.initial_state(), reference.times.front(), integ);
  Trajectory out;
  out.push_back(reference.times.front(), stepper.state());
  for (std::size_t k = 1; k < reference.size(); ++k) {
    stepper.advance_to(reference.times[k]);
    out.push_back(reference.times[k], stepper.state());
  }
  return out;
}

}  // namespace nudgenet
