#include "nudgenet/pipeline.hpp"

#include "nudgenet/io_util.hpp"
#include "nudgenet/parallel.hpp"
#include "nudgenet/trajectory_io.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

namespace nudgenet {

using nlohmann::json;

namespace {

Ensemble checked_ensemble(const EnsembleSpec& spec, const PipelineConfig& cfg, int jobs) {
  Ensemble e = generate_ensemble(spec, cfg.system, cfg.integ, jobs);
  if (!e.failures.empty()) {
    const auto& f = e.failures.front();
    throw IntegrationError("ensemble member " + std::to_string(f.member) + " failed: " + f.message,
                           f.last_good_time);
  }
  return e;
}

}  // namespace

Ensemble make_train_ensemble(const PipelineConfig& cfg, int jobs) {
  return checked_ensemble(cfg.ensemble, cfg, jobs);
}

Ensemble make_test_ensemble(const PipelineConfig& cfg, int jobs) {
  return checked_ensemble(cfg.test_ensemble(), cfg, jobs);
}

std::string ensemble_hash(const std::vector<Trajectory>& refs) {
  std::ostringstream os;
  for (const auto& r : refs) write_trajectory(os, r);
  return hash_bytes(os.str());
}

Dataset make_dataset(const PipelineConfig& cfg, const std::vector<Trajectory>& refs, int jobs,
                     std::ostream* log) {
  std::vector<std::string> dropped;
  Dataset d = build_dataset(refs, cfg.system, cfg.nudging(), cfg.windows, cfg.integ, jobs, &dropped);
  if (log) {
    for (const auto& line : dropped) *log << "  dropped: " << line << '\n';
  }
  d.meta.seed = cfg.seed;
  d.meta.config_hash = cfg.hash();
  d.meta.ensemble_hash = ensemble_hash(refs);
  return d;
}

std::string TrainedModels::hash() const {
  return reduced ? family_hash(models) : model_hash(models.at(0));
}

TrainedModels train_models(const Dataset& data, const PipelineConfig& cfg, int jobs, std::ostream* log) {
  TrainedModels out;
  out.reduced = cfg.arch.reduced;
  const std::string dhash = dataset_hash(data);
  TrainConfig tc = cfg.training;
  tc.seed = cfg.seed;
  if (out.reduced) {
    const auto arch_for = [&](int n_in) { return cfg.arch.make(n_in, 1); };
    FamilyResult fam = train_reduced_family(data, arch_for, cfg.loss, tc, jobs, log);
    out.failures = fam.failures;
    if (!fam.failures.empty()) {
      throw std::runtime_error("training failed for component " + std::to_string(fam.failures.front().component) +
                               ": " + fam.failures.front().message);
    }
    for (auto& m : fam.members) {
      m.model.dataset_hash = dhash;
      out.models.push_back(std::move(m.model));
      out.reports.push_back(std::move(m.report));
    }
  } else {
    tc.log_every = log ? 250 : 0;
    TrainResult r = train(data, cfg.arch.make(data.input_dim(), data.output_dim()), cfg.loss, tc, log);
    r.model.dataset_hash = dhash;
    out.models.push_back(std::move(r.model));
    out.reports.push_back(std::move(r.report));
  }
  return out;
}

void save_models(const std::filesystem::path& dir, const TrainedModels& m) {
  std::filesystem::create_directories(dir);
  if (!m.reduced) {
    save_model(dir / "model.bin", m.models.at(0));
    return;
  }
  for (const auto& mdl : m.models) {
    char name[32];
    std::snprintf(name, sizeof name, "component_%02d.bin", mdl.component);
    save_model(dir / name, mdl);
  }
}

TrainedModels load_models(const std::filesystem::path& dir) {
  TrainedModels m;
  if (std::filesystem::is_regular_file(dir)) {
    m.models.push_back(load_model(dir));
    m.reduced = m.models.front().component != 0;
    return m;
  }
  if (std::filesystem::exists(dir / "model.bin")) {
    m.models.push_back(load_model(dir / "model.bin"));
    return m;
  }
  m.reduced = true;
  for (int i = 1;; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "component_%02d.bin", i);
    if (!std::filesystem::exists(dir / name)) break;
    m.models.push_back(load_model(dir / name));
  }
  if (m.models.empty()) throw FormatError("no model files in " + dir.string());
  return m;
}

RunBatch run_nudging_batch(const PipelineConfig& cfg, const std::vector<Trajectory>& refs, int jobs) {
  const NudgingConfig nc = cfg.nudging();
  const VectorField f = cfg.system.field();
  RunBatch b;
  b.runs.resize(refs.size());
  std::vector<std::string> err(refs.size());
  parallel_for(refs.size(), jobs, [&](std::size_t n) {
    try {
      b.runs[n] = assimilate_nudging(observe(refs[n], nc.op), f, nc, cfg.integ);
    } catch (const std::exception& e) {
      err[n] = e.what();
    }
  });
  for (std::size_t n = 0; n < refs.size(); ++n) {
    if (!err[n].empty()) b.failures.emplace_back(n, err[n]);
  }
  return b;
}

RunBatch run_dnn_batch(const PipelineConfig& cfg, const TrainedModels& models,
                       const std::vector<Trajectory>& refs, int jobs) {
  RunBatch b;
  b.runs.resize(refs.size());
  std::vector<std::string> err(refs.size());
  parallel_for(refs.size(), jobs, [&](std::size_t n) {
    try {
      const ObservationSeries obs = observe(refs[n], cfg.op);
      b.runs[n] = models.reduced ? assimilate_dnn_reduced(models.models, obs)
                                 : assimilate_dnn(models.models.at(0), obs);
    } catch (const std::exception& e) {
      err[n] = e.what();
    }
  });
  for (std::size_t n = 0; n < refs.size(); ++n) {
    if (!err[n].empty()) b.failures.emplace_back(n, err[n]);
  }
  return b;
}

RmseReport batch_rmse(const PipelineConfig& cfg, const RunBatch& batch, const std::vector<Trajectory>& refs) {
  std::vector<AssimilationRun> runs;
  std::vector<Trajectory> matched;
  std::size_t f = 0;
  for (std::size_t n = 0; n < batch.runs.size(); ++n) {
    if (f < batch.failures.size() && batch.failures[f].first == n) {
      ++f;
      continue;
    }
    runs.push_back(batch.runs[n]);
    matched.push_back(refs[n]);
  }
  const std::vector<int> comps = cfg.evaluation.observed_only ? cfg.op.indices() : std::vector<int>{};
  return rmse(runs, matched, cfg.evaluation.k0, cfg.evaluation.horizon, comps);
}

json ExperimentResult::to_json() const {
  json j;
  j["label"] = label;
  j["nudging"] = nudging.to_json();
  j["dnn"] = dnn.to_json();
  j["nudging_failures"] = nudging_failures;
  j["dnn_failures"] = dnn_failures;
  json tr = json::array();
  for (const auto& r : train_reports) tr.push_back(train_report_to_json(r));
  j["training"] = tr;
  j["seconds"] = seconds;
  return j;
}

ExperimentResult run_experiment(const PipelineConfig& cfg, const std::string& label, int jobs,
                                const std::optional<std::filesystem::path>& out, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  auto stamp = [&](const std::string& what) {
    if (log) {
      *log << "[" << label << " "
           << io::format_double(std::round(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() * 10) / 10)
           << "s] " << what << '\n';
    }
  };
  ExperimentResult res;
  res.label = label;
  if (out) {
    std::filesystem::create_directories(*out);
    io::write_file(*out / "config.ini", cfg.to_ini());
  }

  stamp("generating training references");
  const Ensemble train_refs = make_train_ensemble(cfg, jobs);
  stamp("building dataset");
  const Dataset data = make_dataset(cfg, train_refs.refs, jobs, log);
  if (out) save_dataset(*out / "dataset.bin", data);
  stamp("training (" + std::to_string(data.samples.size()) + " samples)");
  const TrainedModels models = train_models(data, cfg, jobs, log);
  res.train_reports = models.reports;
  if (out) {
    save_models(*out / "models", models);
    if (!models.reduced) {
      io::write_file(*out / "train_report.json", train_report_to_json(models.reports.front()).dump(2) + "\n");
      io::write_file(*out / "loss_history.csv", loss_history_csv(models.reports.front()));
    }
  }
  stamp("generating test references");
  const Ensemble test = make_test_ensemble(cfg, jobs);
  stamp("nudging runs");
  const RunBatch nud = run_nudging_batch(cfg, test.refs, jobs);
  stamp("DNN runs");
  const RunBatch dnn = run_dnn_batch(cfg, models, test.refs, jobs);
  res.nudging_failures = nud.failures.size();
  res.dnn_failures = dnn.failures.size();
  for (const auto& [n, msg] : dnn.failures) {
    if (log) *log << "  DNN run " << n << " failed: " << msg << '\n';
  }
  auto safe_rmse = [&](const RunBatch& b) {
    try {
      return batch_rmse(cfg, b, test.refs);
    } catch (const InvalidInput&) {
      RmseReport r;
      r.rmse = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
  };
  res.nudging = safe_rmse(nud);
  res.dnn = safe_rmse(dnn);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out) {
    const auto runs_dir = *out / "runs";
    std::filesystem::create_directories(runs_dir);
    const std::string ehash = ensemble_hash(test.refs);
    save_ensemble(*out / "test_refs.bin", test.refs);
    for (std::size_t n = 0; n < test.refs.size(); ++n) {
      char name[64];
      json meta = {{"ensemble_hash", ehash}, {"ref_index", n}, {"config_hash", cfg.hash()}};
      if (!nud.runs[n].states.empty()) {
        std::snprintf(name, sizeof name, "nudging_%03zu.csv", n);
        save_run(runs_dir / name, nud.runs[n], meta);
      }
      if (!dnn.runs[n].states.empty()) {
        std::snprintf(name, sizeof name, "dnn_%03zu.csv", n);
        save_run(runs_dir / name, dnn.runs[n], meta);
      }
    }
    io::write_file(*out / "result.json", res.to_json().dump(2) + "\n");
  }
  stamp("nudging RMSE " + io::format_double(res.nudging.rmse) + ", DNN RMSE " + io::format_double(res.dnn.rmse));
  return res;
}

}  // namespace nudgenet
