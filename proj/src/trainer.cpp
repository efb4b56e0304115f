#include "nudgenet/trainer.hpp"

#include "nudgenet/io_util.hpp"
#include "nudgenet/lbfgs.hpp"
#include "nudgenet/parallel.hpp"
#include "nudgenet/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>

namespace nudgenet {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw InvalidInput("training: split_fraction must lie in (0, 1)");
  }
  if (patience < 1) throw InvalidInput("training: patience must be >= 1");
  if (max_iters < 1) throw InvalidInput("training: max_iters must be >= 1");
  if (lbfgs_memory < 1) throw InvalidInput("training: lbfgs_memory must be >= 1");
  if (penalty_double_every < 0) throw InvalidInput("training: penalty_double_every must be >= 0");
  if (max_consecutive_failures < 1) {
    throw InvalidInput("training: max_consecutive_failures must be >= 1");
  }
  if (log_every < 0) throw InvalidInput("training: log_every must be >= 0");
}

Split split_by_reference(const Dataset& data, double fraction, std::uint64_t seed) {
  if (data.samples.empty()) throw InvalidInput("split: dataset is empty");
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidInput("split: fraction must lie in (0, 1)");
  std::vector<int> refs;
  {
    std::set<int> seen;
    for (const auto& s : data.samples) seen.insert(s.ref_id);
    refs.assign(seen.begin(), seen.end());
  }
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(refs.size())));
  if (n_train == 0 || n_train == refs.size()) {
    throw InvalidInput("split: fraction " + io::format_double(fraction) + " on " +
                       std::to_string(refs.size()) + " references leaves one side empty");
  }
  // Fisher-Yates with the shuffle stream.
  Philox rng(seed, stream_id(StreamPurpose::shuffle, 0));
  for (std::size_t i = refs.size(); i > 1; --i) {
    std::swap(refs[i - 1], refs[static_cast<std::size_t>(rng.below(i))]);
  }
  const std::set<int> train_refs(refs.begin(), refs.begin() + static_cast<std::ptrdiff_t>(n_train));
  Split split;
  for (std::size_t k = 0; k < data.samples.size(); ++k) {
    (train_refs.count(data.samples[k].ref_id) ? split.train : split.validation).push_back(k);
  }
  return split;
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw InvalidInput("early stopping: patience must be >= 1");
}

bool EarlyStopping::update(int iteration, double value) {
  improved_ = value < best_ || best_iter_ < 0;
  if (improved_) {
    best_ = value;
    best_iter_ = iteration;
  }
  return iteration - best_iter_ >= patience_;
}

namespace {

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void bias_statistics(const ResNetParams& p, double& violation_sq, double& bias_sq) {
  violation_sq = 0.0;
  bias_sq = 0.0;
  for (int l = 0; l <= p.arch().layers() - 2; ++l) {
    const auto b = p.bias(l);
    bias_sq += b.squaredNorm();
    for (Eigen::Index j = 0; j + 1 < b.size(); ++j) {
      const double v = std::min(b[j + 1] - b[j], 0.0);
      violation_sq += v * v;
    }
  }
}

}  // namespace

TrainResult train_batches(const Batch& train_set, const Batch& validation_set,
                          const ResNetParams& init, const LossConfig& loss_cfg,
                          const TrainConfig& train_cfg, std::ostream* log) {
  train_cfg.validate();
  loss_cfg.validate();
  const auto& arch = init.arch();
  arch.validate();
  if (train_set.size() == 0) throw InvalidInput("training: empty training set");
  if (train_set.inputs.rows() != arch.input_dim() || train_set.targets.rows() != arch.output_dim()) {
    throw InvalidInput("training: data dimensions (" + std::to_string(train_set.inputs.rows()) + ", " +
                       std::to_string(train_set.targets.rows()) +
                       ") do not match the architecture's input/output widths");
  }
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  Surrogate& model = result.model;
  TrainReport& rep = result.report;
  model.norm = train_cfg.standardize ? Standardizer::fit(train_set.inputs, train_set.targets)
                                     : Standardizer::identity(arch.input_dim(), arch.output_dim());
  const Batch tb{model.norm.to_net_inputs(train_set.inputs),
                 model.norm.to_net_targets(train_set.targets)};
  const bool has_validation = validation_set.size() > 0;
  const Batch vb = has_validation ? Batch{model.norm.to_net_inputs(validation_set.inputs),
                                          model.norm.to_net_targets(validation_set.targets)}
                                  : tb;
  rep.n_train = static_cast<std::size_t>(train_set.size());
  rep.n_validation = static_cast<std::size_t>(validation_set.size());

  LossConfig cfg = loss_cfg;
  ResNetParams work = init;
  Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    work.flat() = x;
    return loss_and_gradient(work, tb, cfg, g);
  };
  auto validation_loss = [&](const Eigen::VectorXd& x) {
    work.flat() = x;
    return data_loss(work, vb);
  };

  LbfgsConfig lcfg;
  lcfg.memory = train_cfg.lbfgs_memory;
  Lbfgs opt(objective, init.flat(), lcfg);
  EarlyStopping stopper(train_cfg.patience);
  Eigen::VectorXd best = init.flat();
  {
    const double v = validation_loss(best);
    stopper.update(0, v);
    rep.history.push_back({0, opt.value(), v, cfg.gamma_penalty});
  }

  int consecutive_failures = 0;
  rep.stop_reason = "max_iters";
  int it = 1;
  for (; it <= train_cfg.max_iters; ++it) {
    if (train_cfg.penalty_double_every > 0 && cfg.bias_ordering && it > 1 &&
        (it - 1) % train_cfg.penalty_double_every == 0) {
      cfg.gamma_penalty *= 2.0;
      opt.restart();
    }
    const StepStatus status = opt.step();
    if (status == StepStatus::converged) {
      rep.stop_reason = "converged";
      --it;
      break;
    }
    if (status == StepStatus::line_search_failed) {
      ++rep.line_search_failures;
      if (++consecutive_failures >= train_cfg.max_consecutive_failures) {
        rep.aborted = true;
        rep.stop_reason = "line_search_failures";
        break;
      }
    } else {
      consecutive_failures = 0;
    }
    const double v = validation_loss(opt.x());
    rep.history.push_back({it, opt.value(), v, cfg.gamma_penalty});
    const bool stop = stopper.update(it, v);
    if (stopper.improved()) best = opt.x();
    if (log && train_cfg.log_every > 0 && it % train_cfg.log_every == 0) {
      *log << "  iter " << it << "  J=" << io::format_double(opt.value())
           << "  val=" << io::format_double(v) << "  best=" << stopper.best_iteration() << '\n';
    }
    if (stop) {
      rep.stop_reason = "patience";
      break;
    }
  }
  rep.iterations_run = std::min(it, train_cfg.max_iters);
  rep.weak_steps = opt.weak_steps();
  rep.final_training_loss = opt.value();
  rep.best_iteration = stopper.best_iteration();
  rep.best_validation_loss = stopper.best_value();

  model.params = init;
  model.params.flat() = best;
  bias_statistics(model.params, rep.bias_violation_sq, rep.bias_sq_sum);
  rep.bias_order_violation = bias_order_penalty(model.params, 1.0);
  if (has_validation) {
    const Eigen::MatrixXd pred = model.predict(validation_set.inputs);
    rep.validation_rmse = ((pred - validation_set.targets).array().square().rowwise().sum() /
                           static_cast<double>(validation_set.size()))
                              .sqrt()
                              .matrix();
  }
  rep.wallclock_seconds = elapsed(start);
  return result;
}

TrainResult train(const Dataset& data, const ResNetArch& arch, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg, std::ostream* log, std::uint64_t init_stream) {
  train_cfg.validate();
  arch.validate();
  if (data.input_dim() != arch.input_dim() || data.output_dim() != arch.output_dim()) {
    throw InvalidInput("training: dataset dims (" + std::to_string(data.input_dim()) + " -> " +
                       std::to_string(data.output_dim()) + ") do not match architecture (" +
                       std::to_string(arch.input_dim()) + " -> " + std::to_string(arch.output_dim()) +
                       ")");
  }
  const Split split = split_by_reference(data, train_cfg.split_fraction, train_cfg.seed);
  const ResNetParams init =
      box_init(arch, train_cfg.seed, stream_id(StreamPurpose::init_params, init_stream));
  TrainResult r = train_batches(make_batch(data, split.train), make_batch(data, split.validation),
                                init, loss_cfg, train_cfg, log);
  r.model.provenance["split"] = {{"by", "reference"},
                                 {"fraction", train_cfg.split_fraction},
                                 {"seed", train_cfg.seed}};
  r.model.provenance["init_stream"] = init_stream;
  r.model.provenance["init"] = "box (best effort): unit normal rows through a uniform point of the input box, sorted biases";
  r.model.provenance["loss"] = {{"lambda", loss_cfg.lambda},
                                {"gamma0", loss_cfg.gamma_penalty},
                                {"gamma_double_every", train_cfg.penalty_double_every},
                                {"bias_ordering", loss_cfg.bias_ordering}};
  return r;
}

std::vector<Surrogate> FamilyResult::models() const {
  std::vector<Surrogate> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.model);
  return out;
}

FamilyResult train_reduced_family(const Dataset& full,
                                  const std::function<ResNetArch(int input_dim)>& arch_for,
                                  const LossConfig& loss_cfg, const TrainConfig& train_cfg,
                                  int jobs, std::ostream* log) {
  if (full.meta.system.kind != SystemKind::lorenz96) {
    throw InvalidInput("reduced training needs a Lorenz 96 dataset");
  }
  const int d = full.meta.state_dim;
  FamilyResult out;
  out.members.resize(static_cast<std::size_t>(d));
  std::vector<bool> ok(static_cast<std::size_t>(d), false);
  std::vector<std::string> errors(static_cast<std::size_t>(d));
  std::mutex log_mutex;
  parallel_for(static_cast<std::size_t>(d), jobs, [&](std::size_t k) {
    const int component = static_cast<int>(k) + 1;
    try {
      const Dataset reduced = reduce_dataset(full, component);
      TrainResult r = train(reduced, arch_for(reduced.input_dim()), loss_cfg, train_cfg, nullptr,
                            static_cast<std::uint64_t>(component));
      r.model.component = component;
      if (log) {
        const std::lock_guard lock(log_mutex);
        *log << "  component " << component << ": " << r.report.iterations_run << " iters, val rmse "
             << io::format_double(r.report.validation_rmse.size() ? r.report.validation_rmse[0] : 0.0)
             << ", " << r.report.stop_reason << '\n';
      }
      out.members[k] = std::move(r);
      ok[k] = true;
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  for (int i = 0; i < d; ++i) {
    if (!ok[static_cast<std::size_t>(i)]) {
      out.failures.push_back({i + 1, errors[static_cast<std::size_t>(i)]});
    }
  }
  return out;
}

json train_report_to_json(const TrainReport& r) {
  json j;
  j["iterations_run"] = r.iterations_run;
  j["best_iteration"] = r.best_iteration;
  j["best_validation_loss"] = r.best_validation_loss;
  j["final_training_loss"] = r.final_training_loss;
  j["bias_order_violation"] = r.bias_order_violation;
  j["bias_violation_sq"] = r.bias_violation_sq;
  j["bias_sq_sum"] = r.bias_sq_sum;
  j["wallclock_seconds"] = r.wallclock_seconds;
  j["line_search_failures"] = r.line_search_failures;
  j["weak_steps"] = r.weak_steps;
  j["aborted"] = r.aborted;
  j["stop_reason"] = r.stop_reason;
  j["validation_rmse"] = std::vector<double>(r.validation_rmse.begin(), r.validation_rmse.end());
  j["n_train"] = r.n_train;
  j["n_validation"] = r.n_validation;
  return j;
}

std::string loss_history_csv(const TrainReport& r) {
  std::string out = "iteration,train,validation,gamma\n";
  for (const auto& h : r.history) {
    out += std::to_string(h.iteration) + ',' + io::format_double(h.train) + ',' +
           io::format_double(h.validation) + ',' + io::format_double(h.gamma) + '\n';
  }
  return out;
}

}  // namespace nudgenet
