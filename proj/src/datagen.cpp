#include "nudgenet/datagen.hpp"

#include "nudgenet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>

namespace nudgenet {

void EnsembleSpec::validate() const {
  if (n_refs < 1) {
    throw InvalidInput("ensemble: n_refs must be at least 1");
  }
  if (!(init_std > 0.0)) {
    throw InvalidInput("ensemble: init_std must be positive");
  }
  if (!(spin_up >= 0.0) || !(horizon > 0.0) || !(record_stride > 0.0)) {
    throw InvalidInput("ensemble: need spin_up >= 0, horizon > 0, record_stride > 0");
  }
}

State ensemble_initial_condition(const EnsembleSpec& spec, int dim, std::size_t member) {
  Philox rng(spec.seed, stream_id(spec.purpose, member));
  State u0(dim);
  for (int i = 0; i < dim; ++i) {
    u0[i] = rng.normal(spec.init_mean, spec.init_std);
  }
  return u0;
}

Ensemble generate_ensemble(const EnsembleSpec& spec, const SystemSpec& system,
                           const IntegratorConfig& integ, int jobs) {
  spec.validate();
  integ.validate();
  const auto n = static_cast<std::size_t>(spec.n_refs);
  const VectorField field = system.field();
  IntegratorConfig record = integ;
  record.dense_output_stride = spec.record_stride;

  std::vector<std::optional<Trajectory>> slots(n);
  std::vector<std::optional<MemberFailure>> errors(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    try {
      State u = ensemble_initial_condition(spec, system.dim(), i);
      if (spec.spin_up > 0.0) {
        u = integrate_to(field, u, 0.0, spec.spin_up, integ);
      }
      slots[i] = integrate(field, u, 0.0, spec.horizon, record);
    } catch (const IntegrationError& e) {
      errors[i] = MemberFailure{i, e.last_good_time(), e.what()};
    }
  });

  Ensemble out;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      out.refs.push_back(std::move(*slots[i]));
      out.member_ids.push_back(i);
    } else {
      out.failures.push_back(*errors[i]);
    }
  }
  return out;
}

int Dataset::input_dim() const {
  return samples.empty() ? 0 : static_cast<int>(samples.front().input.size());
}

int Dataset::output_dim() const {
  return samples.empty() ? 0 : static_cast<int>(samples.front().output.size());
}

void Dataset::validate() const {
  const auto m = static_cast<int>(meta.observed_indices.size());
  for (const auto& s : samples) {
    if (s.input.size() != input_dim() || s.output.size() != output_dim()) {
      throw InvalidInput("dataset: inconsistent sample shapes");
    }
  }
  if (!samples.empty() && output_dim() == meta.state_dim &&
      input_dim() != meta.state_dim + m) {
    throw InvalidInput("dataset: input length must be state_dim + observation count");
  }
  // Chain: state part of input(k + 1) equals output(k) for the same reference.
  for (std::size_t j = 1; j < samples.size(); ++j) {
    const auto& prev = samples[j - 1];
    const auto& cur = samples[j];
    if (cur.ref_id == prev.ref_id && cur.window == prev.window + 1 &&
        output_dim() == meta.state_dim &&
        cur.input.head(meta.state_dim) != prev.output) {
      throw InvalidInput("dataset: window chain broken at sample " + std::to_string(j));
    }
  }
}

Dataset build_dataset(const std::vector<Trajectory>& refs, const SystemSpec& system,
                      const NudgingConfig& nudge, int window_count, const IntegratorConfig& integ,
                      int jobs, std::vector<std::string>* dropped_log) {
  nudge.validate();
  integ.validate();
  if (window_count < 1) {
    throw InvalidInput("build_dataset: window_count must be positive");
  }
  const int d = nudge.op.state_dim();
  if (d != system.dim()) {
    throw InvalidInput("build_dataset: operator dimension does not match the system");
  }
  const VectorField base_rhs = system.field();
  for (const auto& r : refs) {
    if (r.dim() != d) {
      throw InvalidInput("build_dataset: reference dimension does not match operator");
    }
    if (static_cast<int>(r.size()) < window_count + 1) {
      throw InvalidInput("build_dataset: reference shorter than window_count * delta");
    }
    for (int k = 0; k <= window_count; ++k) {
      const double expected = r.times.front() + k * nudge.delta;
      if (std::abs(r.times[static_cast<std::size_t>(k)] - expected) > 1e-9 * std::max(1.0, expected)) {
        throw InvalidInput("build_dataset: reference not sampled at the observation spacing");
      }
    }
  }

  const auto n = refs.size();
  std::vector<std::vector<TrainingSample>> per_ref(n);
  std::vector<std::string> drops;
  std::mutex drops_mutex;
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& ref = refs[i];
    State w = nudge.initial_state();
    auto& out = per_ref[i];
    out.reserve(static_cast<std::size_t>(window_count));
    for (int k = 0; k < window_count; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Eigen::VectorXd obs = nudge.op.apply(ref.states[ks]);
      State next;
      try {
        next = solve_nudging_window(base_rhs, w, obs, ref.times[ks], ref.times[ks + 1], nudge, integ);
      } catch (const IntegrationError& e) {
        std::lock_guard lock(drops_mutex);
        drops.push_back("ref " + std::to_string(i) + " window " + std::to_string(k) + ": " + e.what());
        // Later windows of this reference depend on the lost state.
        return;
      }
      TrainingSample s;
      s.input.resize(d + nudge.op.size());
      s.input << w, obs;
      s.output = next;
      s.ref_id = static_cast<int>(i);
      s.window = k;
      out.push_back(std::move(s));
      w = std::move(next);
    }
  });

  Dataset data;
  std::size_t total = 0;
  for (auto& v : per_ref) {
    total += v.size();
  }
  data.samples.reserve(total);
  for (auto& v : per_ref) {
    for (auto& s : v) {
      data.samples.push_back(std::move(s));
    }
  }
  const std::size_t expected = n * static_cast<std::size_t>(window_count);
  const std::size_t dropped = expected - total;
  std::sort(drops.begin(), drops.end());
  if (dropped_log != nullptr) {
    *dropped_log = drops;
  }
  if (static_cast<double>(dropped) > 0.001 * static_cast<double>(expected)) {
    throw DatasetInvalid("build_dataset: " + std::to_string(dropped) + " of " +
                         std::to_string(expected) + " windows dropped (limit 0.1%)");
  }
  data.meta.system = system;
  data.meta.mu = nudge.mu;
  data.meta.delta = nudge.delta;
  data.meta.innovation = to_string(nudge.innovation);
  data.meta.observed_indices = nudge.op.indices();
  data.meta.state_dim = d;
  data.meta.windows = window_count;
  data.meta.n_refs = static_cast<int>(n);
  return data;
}

std::array<int, 4> stencil_indices(int component, int dim) {
  if (dim < 4 || component < 1 || component > dim) {
    throw InvalidInput("stencil: component out of range");
  }
  auto wrap = [dim](int i) { return ((i - 1) % dim + dim) % dim + 1; };
  return {wrap(component - 2), wrap(component - 1), component, wrap(component + 1)};
}

int reduced_input_dim(int component, const ObservationOperator& op) {
  int n = 4;
  for (int s : stencil_indices(component, op.state_dim())) {
    n += op.observes(s) ? 1 : 0;
  }
  return n;
}

TrainingSample reduce_sample(const TrainingSample& sample, int component,
                             const ObservationOperator& op, SystemKind kind) {
  if (kind != SystemKind::lorenz96) {
    throw InvalidInput("reduce_sample: only supported for the cyclic Lorenz 96 system");
  }
  const int d = op.state_dim();
  if (sample.input.size() != d + op.size() || sample.output.size() != d) {
    throw InvalidInput("reduce_sample: sample does not match operator");
  }
  const auto stencil = stencil_indices(component, d);
  TrainingSample r;
  r.ref_id = sample.ref_id;
  r.window = sample.window;
  r.input.resize(reduced_input_dim(component, op));
  int pos = 0;
  for (int s : stencil) {
    r.input[pos++] = sample.input[s - 1];
  }
  const auto& idx = op.indices();
  for (int s : stencil) {
    const auto it = std::lower_bound(idx.begin(), idx.end(), s);
    if (it != idx.end() && *it == s) {
      r.input[pos++] = sample.input[d + (it - idx.begin())];
    }
  }
  r.output.resize(1);
  r.output[0] = sample.output[component - 1];
  return r;
}

Dataset reduce_dataset(const Dataset& full, int component) {
  const ObservationOperator op(full.meta.observed_indices, full.meta.state_dim);
  Dataset out;
  out.meta = full.meta;
  out.samples.reserve(full.samples.size());
  for (const auto& s : full.samples) {
    out.samples.push_back(reduce_sample(s, component, op, full.meta.system.kind));
  }
  return out;
}

}  // namespace nudgenet
