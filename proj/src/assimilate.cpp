#include "nudgenet/assimilate.hpp"

#include "nudgenet/io_util.hpp"
#include "nudgenet/trajectory_io.hpp"

#include <cmath>

namespace nudgenet {

using nlohmann::json;

std::string to_string(AssimMethod m) {
  switch (m) {
    case AssimMethod::nudging: return "nudging";
    case AssimMethod::dnn_full: return "dnn_full";
    case AssimMethod::dnn_reduced: return "dnn_reduced";
  }
  return "unknown";
}

AssimMethod assim_method_from_string(const std::string& s) {
  if (s == "nudging") return AssimMethod::nudging;
  if (s == "dnn_full" || s == "dnn-full") return AssimMethod::dnn_full;
  if (s == "dnn_reduced" || s == "dnn-reduced") return AssimMethod::dnn_reduced;
  throw InvalidInput("unknown assimilation method '" + s + "'");
}

Trajectory AssimilationRun::trajectory() const {
  Trajectory t;
  t.times = times;
  t.states = states;
  return t;
}

namespace {

void guard(const State& w, std::size_t step) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || std::abs(w[i]) > kDivergenceLimit) {
      throw DivergenceError("assimilation diverged at step " + std::to_string(step) + ": component " +
                                std::to_string(i + 1) + " = " + io::format_double(w[i]),
                            step);
    }
  }
}

State start_state(const State& w0, int dim) {
  if (w0.size() == 0) return State::Zero(dim);
  if (w0.size() != dim) {
    throw InvalidInput("assimilation: w0 has length " + std::to_string(w0.size()) + ", expected " +
                       std::to_string(dim));
  }
  return w0;
}

}  // namespace

AssimilationRun assimilate_map(const OneStepMap& step, const ObservationSeries& observations,
                               const State& w0, AssimMethod method, const std::string& provenance) {
  observations.validate();
  const int d = observations.op.state_dim();
  AssimilationRun run;
  run.method = method;
  run.provenance = provenance;
  State w = start_state(w0, d);
  if (observations.size() == 0) {
    run.times.push_back(0.0);
    run.states.push_back(w);
    return run;
  }
  run.times = observations.times;
  run.states.reserve(observations.size());
  run.states.push_back(w);
  for (std::size_t k = 0; k + 1 < observations.size(); ++k) {
    w = step(w, observations.values[k]);
    if (w.size() != d) {
      throw InvalidInput("assimilation: one-step map returned length " + std::to_string(w.size()));
    }
    guard(w, k + 1);
    run.states.push_back(w);
  }
  return run;
}

std::string model_hash(const Surrogate& model) { return hash_bytes(serialize_model(model)); }

std::string family_hash(const std::vector<Surrogate>& models) {
  std::string all;
  for (const auto& m : models) all += model_hash(m);
  return hash_bytes(all);
}

AssimilationRun assimilate_dnn(const Surrogate& model, const ObservationSeries& observations,
                               const State& w0) {
  const int d = observations.op.state_dim();
  const int m = observations.op.size();
  if (model.input_dim() != d + m || model.output_dim() != d) {
    throw InvalidInput("assimilate_dnn: model maps " + std::to_string(model.input_dim()) + " -> " +
                       std::to_string(model.output_dim()) + ", observations need " +
                       std::to_string(d + m) + " -> " + std::to_string(d));
  }
  Eigen::VectorXd input(d + m);
  const OneStepMap step = [&](const State& w, const Eigen::VectorXd& obs) {
    input << w, obs;
    return State(model.predict(input));
  };
  return assimilate_map(step, observations, w0, AssimMethod::dnn_full, model_hash(model));
}

Eigen::VectorXd reduced_input(const State& w, const Eigen::VectorXd& observation, int component,
                              const ObservationOperator& op) {
  TrainingSample s;
  s.input.resize(w.size() + observation.size());
  s.input << w, observation;
  s.output = Eigen::VectorXd::Zero(w.size());
  return reduce_sample(s, component, op, SystemKind::lorenz96).input;
}

AssimilationRun assimilate_dnn_reduced(const std::vector<Surrogate>& models,
                                       const ObservationSeries& observations, const State& w0) {
  const auto& op = observations.op;
  const int d = op.state_dim();
  if (static_cast<int>(models.size()) != d) {
    throw InvalidInput("assimilate_dnn_reduced: need one model per component (" + std::to_string(d) +
                       "), got " + std::to_string(models.size()));
  }
  for (int i = 1; i <= d; ++i) {
    const auto& mdl = models[static_cast<std::size_t>(i - 1)];
    if (mdl.input_dim() != reduced_input_dim(i, op) || mdl.output_dim() != 1) {
      throw InvalidInput("assimilate_dnn_reduced: model for component " + std::to_string(i) +
                         " has the wrong shape");
    }
  }
  const OneStepMap step = [&](const State& w, const Eigen::VectorXd& obs) {
    State next(d);
    for (int i = 1; i <= d; ++i) {
      next[i - 1] = models[static_cast<std::size_t>(i - 1)].predict(reduced_input(w, obs, i, op))[0];
    }
    return next;
  };
  return assimilate_map(step, observations, w0, AssimMethod::dnn_reduced, family_hash(models));
}

AssimilationRun assimilate_nudging(const ObservationSeries& observations, const VectorField& base_rhs,
                                   const NudgingConfig& config, const IntegratorConfig& integ) {
  AssimilationRun run;
  run.method = AssimMethod::nudging;
  run.provenance = "mu=" + io::format_double(config.mu);
  if (observations.size() == 0) {
    run.times.push_back(0.0);
    run.states.push_back(config.initial_state());
    return run;
  }
  const Trajectory full = run_discrete_nudging(observations, base_rhs, config, integ);
  // Window endpoints land exactly on the observation times.
  run.times = observations.times;
  std::size_t j = 0;
  for (double t : observations.times) {
    while (j + 1 < full.size() && full.times[j + 1] <= t) ++j;
    if (full.times[j] != t) {
      throw IntegrationError("nudging output misses observation time " + io::format_double(t),
                             full.times[j]);
    }
    run.states.push_back(full.states[j]);
  }
  return run;
}

void save_run(const std::filesystem::path& csv_path, const AssimilationRun& run, const json& meta) {
  io::write_file(csv_path, trajectory_to_csv(run.trajectory()));
  json j = meta;
  j["method"] = to_string(run.method);
  j["provenance"] = run.provenance;
  j["csv_hash"] = hash_file(csv_path);
  io::write_file(csv_path.string() + ".json", j.dump(2) + "\n");
}

AssimilationRun load_run(const std::filesystem::path& csv_path) {
  const Trajectory t = trajectory_from_csv(io::read_file(csv_path));
  AssimilationRun run;
  run.times = t.times;
  run.states = t.states;
  const std::filesystem::path sidecar = csv_path.string() + ".json";
  if (std::filesystem::exists(sidecar)) {
    try {
      const json j = json::parse(io::read_file(sidecar));
      run.method = assim_method_from_string(j.at("method").get<std::string>());
      run.provenance = j.value("provenance", "");
    } catch (const json::exception& e) {
      throw FormatError("run sidecar " + sidecar.string() + ": " + e.what());
    }
  }
  return run;
}

}  // namespace nudgenet
