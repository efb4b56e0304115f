// nudgenet: command-line front end for the assimilation pipeline.

#include "nudgenet/config.hpp"
#include "nudgenet/evaluate.hpp"
#include "nudgenet/io_util.hpp"
#include "nudgenet/pipeline.hpp"
#include "nudgenet/trajectory_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nudgenet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

/// A numerical failure tagged with the module that raised it.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& module, const std::string& what)
      : std::runtime_error("[" + module + "] " + what) {}
};

/// Artifact inputs that do not belong together.
class HashMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class F>
auto tagged(const char* module, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const FormatError&) {
    throw;
  } catch (const fs::filesystem_error&) {
    throw;
  } catch (const InvalidInput&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw NumericalFailure(module, e.what());
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out = "runs";
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "Pipeline config (INI)");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Parent directory for run directories");
}

PipelineConfig resolve(const Common& c, std::optional<PipelineConfig> fallback = std::nullopt) {
  PipelineConfig cfg;
  if (!c.config.empty()) {
    cfg = PipelineConfig::load(c.config);
  } else if (fallback) {
    cfg = *fallback;
  } else {
    throw ConfigError("--config is required");
  }
  if (c.seed) cfg.set_seed(*c.seed);
  cfg.validate();
  return cfg;
}

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

/// Creates <out>/<timestamp>-<config hash>[-n], writes the config snapshot and
/// prints the directory on stdout.
fs::path make_run_dir(const Common& c, const PipelineConfig& cfg, const std::string& command) {
  const std::string base = utc_stamp() + "-" + cfg.hash().substr(0, 12);
  fs::path dir = fs::path(c.out) / base;
  for (int n = 2; fs::exists(dir); ++n) dir = fs::path(c.out) / (base + "-" + std::to_string(n));
  fs::create_directories(dir);
  io::write_file(dir / "config.ini", cfg.to_ini());
  io::write_file(dir / "command.txt", command + "\n");
  std::cout << dir.string() << std::endl;
  return dir;
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

struct Refs {
  std::vector<Trajectory> refs;
  std::string hash;
};

Refs obtain_refs(const std::string& path, const PipelineConfig& cfg, bool test_set, int jobs) {
  Refs r;
  if (!path.empty()) {
    r.refs = load_ensemble(path);
    std::cerr << "loaded " << r.refs.size() << " references from " << path << '\n';
  } else {
    std::cerr << "generating " << (test_set ? "test" : "training") << " references\n";
    r.refs = tagged("datagen", [&] {
      return test_set ? make_test_ensemble(cfg, jobs).refs : make_train_ensemble(cfg, jobs).refs;
    });
  }
  r.hash = ensemble_hash(r.refs);
  return r;
}

void write_runs(const fs::path& dir, const std::string& prefix, const RunBatch& batch, const Refs& refs,
                const PipelineConfig& cfg) {
  fs::create_directories(dir);
  for (std::size_t n = 0; n < batch.runs.size(); ++n) {
    if (batch.runs[n].states.empty()) continue;
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03zu.csv", prefix.c_str(), n);
    save_run(dir / name, batch.runs[n],
             {{"ensemble_hash", refs.hash}, {"ref_index", n}, {"config_hash", cfg.hash()}});
  }
  for (const auto& [n, msg] : batch.failures) std::cerr << "  run " << n << " failed: " << msg << '\n';
}

int report_failures(const RunBatch& batch, const char* module) {
  if (batch.failures.empty()) return 0;
  std::cerr << "[" << module << "] " << batch.failures.size() << " of " << batch.runs.size()
            << " runs failed\n";
  return batch.failures.size() == batch.runs.size() ? kExitNumerical : 0;
}

// ---------------------------------------------------------------- commands

int cmd_generate(const Common& c, const std::string& set, const std::string& argv) {
  const PipelineConfig cfg = resolve(c);
  const bool test = set == "test";
  const fs::path dir = make_run_dir(c, cfg, argv);
  const Refs r = obtain_refs("", cfg, test, c.jobs);
  save_ensemble(dir / "refs.bin", r.refs);
  write_json(dir / "refs.json", {{"set", set},
                                 {"n_refs", r.refs.size()},
                                 {"ensemble_hash", r.hash},
                                 {"config_hash", cfg.hash()}});
  return 0;
}

int cmd_nudge(const Common& c, const std::string& refs_path, const std::string& argv) {
  const PipelineConfig cfg = resolve(c);
  const fs::path dir = make_run_dir(c, cfg, argv);
  const Refs r = obtain_refs(refs_path, cfg, true, c.jobs);
  std::cerr << "nudging " << r.refs.size() << " references (mu " << cfg.mu << ", delta " << cfg.delta << ")\n";
  const RunBatch b = run_nudging_batch(cfg, r.refs, c.jobs);
  write_runs(dir / "runs", "nudging", b, r, cfg);
  if (refs_path.empty()) save_ensemble(dir / "refs.bin", r.refs);
  return report_failures(b, "nudging");
}

int cmd_build_dataset(const Common& c, const std::string& refs_path, const std::string& argv) {
  const PipelineConfig cfg = resolve(c);
  const fs::path dir = make_run_dir(c, cfg, argv);
  const Refs r = obtain_refs(refs_path, cfg, false, c.jobs);
  std::cerr << "building dataset from " << r.refs.size() << " references\n";
  const Dataset d = tagged("datagen", [&] { return make_dataset(cfg, r.refs, c.jobs, &std::cerr); });
  save_dataset(dir / "dataset.bin", d);
  write_json(dir / "dataset.json", {{"n_samples", d.samples.size()},
                                    {"input_dim", d.input_dim()},
                                    {"output_dim", d.output_dim()},
                                    {"dataset_hash", dataset_hash(d)},
                                    {"ensemble_hash", d.meta.ensemble_hash},
                                    {"config_hash", d.meta.config_hash}});
  std::cerr << d.samples.size() << " samples\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& dataset_path, const std::string& argv) {
  const PipelineConfig cfg = resolve(c);
  const Dataset d = load_dataset(dataset_path);
  if (d.meta.state_dim != cfg.system.dim() || d.meta.observed_indices != cfg.op.indices()) {
    throw HashMismatch("dataset " + dataset_path + " was built for a different system or observation pattern");
  }
  const fs::path dir = make_run_dir(c, cfg, argv);
  std::cerr << "training on " << d.samples.size() << " samples\n";
  const TrainedModels m = tagged("trainer", [&] { return train_models(d, cfg, c.jobs, &std::cerr); });
  save_models(dir / "models", m);
  json reports = json::array();
  for (const auto& r : m.reports) reports.push_back(train_report_to_json(r));
  write_json(dir / "train_report.json", m.reduced ? reports : reports.front());
  if (!m.reduced) io::write_file(dir / "loss_history.csv", loss_history_csv(m.reports.front()));
  write_json(dir / "models.json", {{"models_hash", m.hash()},
                                   {"dataset_hash", dataset_hash(d)},
                                   {"reduced", m.reduced},
                                   {"count", m.models.size()}});
  return 0;
}

int cmd_assimilate(const Common& c, const std::string& models_path, const std::string& refs_path,
                   const std::string& argv) {
  const PipelineConfig cfg = resolve(c);
  const TrainedModels m = load_models(models_path);
  const int expect_in = m.reduced ? -1 : cfg.system.dim() + cfg.op.size();
  if (!m.reduced && m.models.front().input_dim() != expect_in) {
    throw HashMismatch("model input dimension does not match the config's observation pattern");
  }
  const fs::path dir = make_run_dir(c, cfg, argv);
  const Refs r = obtain_refs(refs_path, cfg, true, c.jobs);
  std::cerr << "assimilating " << r.refs.size() << " references with " << m.models.size() << " network(s)\n";
  const RunBatch b = run_dnn_batch(cfg, m, r.refs, c.jobs);
  write_runs(dir / "runs", "dnn", b, r, cfg);
  if (refs_path.empty()) save_ensemble(dir / "refs.bin", r.refs);
  return report_failures(b, "assimilate");
}

int cmd_evaluate(const Common& c, const std::string& runs_path, const std::string& refs_path,
                 const std::string& models_path, const std::string& argv) {
  const PipelineConfig cfg = resolve(c);
  const Refs r = obtain_refs(refs_path, cfg, true, c.jobs);
  std::optional<std::string> mhash;
  if (!models_path.empty()) mhash = load_models(models_path).hash();

  std::map<std::string, std::vector<std::pair<std::size_t, AssimilationRun>>> by_method;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(runs_path)) {
    if (e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidInput("no run files in " + runs_path);
  for (const auto& f : files) {
    const fs::path side = f.string() + ".json";
    if (!fs::exists(side)) throw HashMismatch(f.string() + ": missing provenance sidecar");
    const json meta = json::parse(io::read_file(side));
    if (meta.value("ensemble_hash", "") != r.hash) {
      throw HashMismatch(f.string() + ": produced from a different reference ensemble");
    }
    AssimilationRun run = load_run(f);
    if (mhash && run.method != AssimMethod::nudging && run.provenance != *mhash) {
      throw HashMismatch(f.string() + ": produced by a different model");
    }
    const auto idx = meta.at("ref_index").get<std::size_t>();
    if (idx >= r.refs.size()) throw HashMismatch(f.string() + ": reference index out of range");
    by_method[to_string(run.method)].emplace_back(idx, std::move(run));
  }

  const std::vector<int> comps = cfg.evaluation.observed_only ? cfg.op.indices() : std::vector<int>{};
  json out = json::object();
  for (auto& [method, list] : by_method) {
    std::vector<AssimilationRun> runs;
    std::vector<Trajectory> refs;
    for (auto& [idx, run] : list) {
      refs.push_back(r.refs[idx]);
      runs.push_back(std::move(run));
    }
    RmseReport rep = rmse(runs, refs, cfg.evaluation.k0, cfg.evaluation.horizon, comps);
    rep.method = method;
    std::cerr << method << ": RMSE " << rep.rmse << " (state norm " << rep.rmse_state << ") over "
              << rep.n_runs << " runs\n";
    json j = rep.to_json();
    j.erase("per_run");
    out[method] = j;
  }
  if (mhash) out["models_hash"] = *mhash;
  out["ensemble_hash"] = r.hash;
  const fs::path dir = make_run_dir(c, cfg, argv);
  write_json(dir / "rmse.json", out);
  return 0;
}

int cmd_verify(const Common& c, const std::string& which, std::optional<double> mu,
               std::optional<double> delta, VerifyOptions opts, bool write, const std::string& argv) {
  Lorenz63Params params;
  std::optional<PipelineConfig> cfg;
  if (!c.config.empty()) {
    cfg = resolve(c);
    if (cfg->system.kind != SystemKind::lorenz63) throw ConfigError("verify-theory needs a lorenz63 system");
    params = cfg->system.l63;
  }
  if (c.seed) opts.seed = *c.seed;
  TheoryCase tc;
  try {
    tc = theory_case_from_string(which);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  const TheoryBounds probe = theory_bounds(params, tc, 1.0, 1.0);
  const double m = mu.value_or(1.05 * probe.mu_min);
  const double d = delta.value_or(tc == TheoryCase::continuous_x ? opts.sample_stride
                                                                 : 0.99 * theory_delta_max(params, tc, m));
  std::cerr << "verifying " << which << " at mu " << m << ", delta " << d << '\n';
  const VerificationReport rep = tagged("evaluate", [&] { return verify_theorem(tc, params, m, d, opts); });
  std::cout << rep.summary() << std::endl;
  if (write) {
    PipelineConfig snap = cfg.value_or(PipelineConfig::lorenz63(1));
    snap.system.l63 = params;
    const fs::path dir = make_run_dir(c, snap, argv);
    write_json(dir / "verify.json", rep.to_json());
  }
  return rep.passed ? 0 : kExitCheck;
}

// ---------------------------------------------------------------- reproduce

struct PublishedRow {
  std::string label;
  double nudging;
  double dnn;
};

struct CheckRule {
  double nudging_tol;  ///< relative band around the published nudging value
  double dnn_ratio;    ///< DNN RMSE <= ratio * nudging RMSE
};

bool check_result(const ExperimentResult& r, const PublishedRow& published, const CheckRule& rule, json& out) {
  const double nud = r.nudging.rmse_state;
  const double dnn = r.dnn.rmse_state;
  const bool nud_ok = std::isfinite(nud) && std::abs(nud - published.nudging) <= rule.nudging_tol * published.nudging;
  const bool dnn_ok = std::isfinite(dnn) && r.dnn_failures == 0 && dnn <= rule.dnn_ratio * nud;
  out = {{"label", r.label},
         {"nudging_rmse", nud},
         {"dnn_rmse", dnn},
         {"published_nudging", published.nudging},
         {"published_dnn", published.dnn},
         {"nudging_band", rule.nudging_tol},
         {"dnn_ratio_limit", rule.dnn_ratio},
         {"nudging_ok", nud_ok},
         {"dnn_ok", dnn_ok}};
  std::cerr << (nud_ok && dnn_ok ? "PASS " : "FAIL ") << r.label << ": nudging " << nud << " (published "
            << published.nudging << " +/- " << rule.nudging_tol * 100 << "%), DNN " << dnn << " (limit "
            << rule.dnn_ratio * nud << ")\n";
  return nud_ok && dnn_ok;
}

int run_reproduction(const Common& c, const std::vector<std::pair<PipelineConfig, PublishedRow>>& cases,
                     const CheckRule& rule, bool check, const std::string& title, const std::string& argv) {
  const fs::path dir = make_run_dir(c, cases.front().first, argv);
  ResultTable table;
  table.title = title;
  std::vector<std::optional<double>> nud_row, dnn_row, pub_nud, pub_dnn;
  json checks = json::array();
  bool all_ok = true;
  for (const auto& [cfg, published] : cases) {
    table.columns.push_back(published.label);
    const ExperimentResult r =
        tagged("pipeline", [&] { return run_experiment(cfg, published.label, c.jobs, dir / published.label, &std::cerr); });
    nud_row.push_back(r.nudging.rmse_state);
    dnn_row.push_back(r.dnn.rmse_state);
    pub_nud.push_back(published.nudging);
    pub_dnn.push_back(published.dnn);
    json cj;
    all_ok = check_result(r, published, rule, cj) && all_ok;
    checks.push_back(cj);
  }
  table.rows = {{"Nudging", nud_row}, {"DNN", dnn_row}, {"Nudging (published)", pub_nud}, {"DNN (published)", pub_dnn}};
  io::write_file(dir / "table.txt", table.to_text());
  write_json(dir / "table.json", table.to_json());
  write_json(dir / "check.json", checks);
  std::cerr << table.to_text();
  if (check && !all_ok) {
    std::cerr << "regression: acceptance thresholds not met\n";
    return kExitCheck;
  }
  return 0;
}

int cmd_reproduce_l63(const Common& c, const std::string& obs, bool check, const std::string& argv) {
  std::vector<std::pair<PipelineConfig, PublishedRow>> cases;
  if (!c.config.empty() && obs == "both") {
    throw ConfigError("with --config, choose the published row to compare against with --obs x or --obs y");
  }
  auto add = [&](int comp, PublishedRow row) { cases.emplace_back(resolve(c, PipelineConfig::lorenz63(comp)), row); };
  if (obs == "x" || obs == "both") add(1, {"x-obs", 6.0782, 6.4456});
  if (obs == "y" || obs == "both") add(2, {"y-obs", 5.7953, 5.8000});
  if (cases.empty()) throw ConfigError("--obs must be x, y or both");
  return run_reproduction(c, cases, {0.25, 1.25}, check, "Lorenz 63 RMSE", argv);
}

int cmd_reproduce_l96(const Common& c, int obs, bool check, const std::string& argv) {
  PublishedRow row;
  if (obs == 20) {
    row = {"20-obs", 11.9754, 17.6243};
  } else if (obs == 13) {
    row = {"13-obs", 25.1511, 39.2055};
  } else if (obs == 4) {
    row = {"4-obs", 36.4937, 39.7268};
  } else {
    throw ConfigError("--obs must be 20, 13 or 4");
  }
  const PipelineConfig cfg = resolve(c, PipelineConfig::lorenz96(obs));
  return run_reproduction(c, {{cfg, row}}, {0.30, 1.8}, check, "Lorenz 96 RMSE", argv);
}

std::string joined_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nudging data assimilation with neural one-step surrogates"};
  app.require_subcommand(1);
  const std::string cmdline = joined_argv(argc, argv);

  Common c;
  std::string set = "train", refs, dataset, models, runs, which = "continuous-x", obs63 = "both";
  int obs96 = 20;
  bool check = false, write = false;
  std::optional<double> mu, delta;
  VerifyOptions vopts;

  auto* gen = app.add_subcommand("generate", "Spin up a reference ensemble");
  add_common(gen, c, true);
  gen->add_option("--set", set, "train or test")->check(CLI::IsMember({"train", "test"}));

  auto* nud = app.add_subcommand("nudge", "Discrete nudging on test references");
  add_common(nud, c, true);
  nud->add_option("--refs", refs, "Reference ensemble (default: generate the test set)");

  auto* bds = app.add_subcommand("build-dataset", "Nudging windows to training samples");
  add_common(bds, c, true);
  bds->add_option("--refs", refs, "Reference ensemble (default: generate the training set)");

  auto* trn = app.add_subcommand("train", "Fit the surrogate network(s)");
  add_common(trn, c, true);
  trn->add_option("--dataset", dataset, "Dataset file")->required();

  auto* asm_ = app.add_subcommand("assimilate", "Run trained surrogates on test references");
  add_common(asm_, c, true);
  asm_->add_option("--models", models, "Model file or directory")->required();
  asm_->add_option("--refs", refs, "Reference ensemble (default: generate the test set)");

  auto* evl = app.add_subcommand("evaluate", "RMSE of stored runs against their references");
  add_common(evl, c, true);
  evl->add_option("--runs", runs, "Directory of run CSV files")->required();
  evl->add_option("--refs", refs, "Reference ensemble the runs were produced from")->required();
  evl->add_option("--models", models, "Require DNN runs to come from these models");

  auto* ver = app.add_subcommand("verify-theory", "Check a convergence theorem numerically");
  add_common(ver, c, false);
  ver->add_option("--case", which, "continuous-x, discrete-x or discrete-yz");
  ver->add_option("--mu", mu, "Nudging parameter (default 1.05 mu_min)");
  ver->add_option("--delta", delta, "Observation spacing (default just inside the admissible bound)");
  ver->add_option("--refs", vopts.n_refs, "Number of references")->check(CLI::PositiveNumber);
  ver->add_option("--windows", vopts.n_windows, "Windows per reference (discrete cases)")->check(CLI::PositiveNumber);
  ver->add_option("--duration", vopts.duration, "Checked horizon (continuous case)");
  ver->add_flag("--write", write, "Write verify.json under a run directory");

  auto* rep = app.add_subcommand("reproduce", "End-to-end experiment recipes");
  rep->require_subcommand(1);
  auto* r63 = rep->add_subcommand("lorenz63", "Lorenz 63, x and y observed");
  add_common(r63, c, false);
  r63->add_option("--obs", obs63, "x, y or both");
  r63->add_flag("--check", check, "Exit 4 when the acceptance thresholds are not met");
  auto* r96 = rep->add_subcommand("lorenz96", "Lorenz 96 with a reduced surrogate family");
  add_common(r96, c, false);
  r96->add_option("--obs", obs96, "Observed components: 20, 13 or 4");
  r96->add_flag("--check", check, "Exit 4 when the acceptance thresholds are not met");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(c, set, cmdline);
    if (*nud) return cmd_nudge(c, refs, cmdline);
    if (*bds) return cmd_build_dataset(c, refs, cmdline);
    if (*trn) return cmd_train(c, dataset, cmdline);
    if (*asm_) return cmd_assimilate(c, models, refs, cmdline);
    if (*evl) return cmd_evaluate(c, runs, refs, models, cmdline);
    if (*ver) return cmd_verify(c, which, mu, delta, vopts, write, cmdline);
    if (*r63) return cmd_reproduce_l63(c, obs63, check, cmdline);
    if (*r96) return cmd_reproduce_l96(c, obs96, check, cmdline);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const HashMismatch& e) {
    std::cerr << "provenance mismatch: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "unreadable artifact: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "unreadable sidecar: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure [pipeline] " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
