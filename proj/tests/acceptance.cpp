// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 1 4 8      selected criteria
//   acceptance --summary  reprint the stored line of every criterion
//
// Exit status is nonzero when any selected criterion fails.

#include "nudgenet/datagen.hpp"
#include "nudgenet/evaluate.hpp"
#include "nudgenet/io_util.hpp"
#include "nudgenet/model.hpp"
#include "nudgenet/pipeline.hpp"
#include "nudgenet/rng.hpp"
#include "nudgenet/theory.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nudgenet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// 1 ------------------------------------------------------------------------
Outcome attractor_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  const Lorenz63Params p;
  const double K = lorenz63_attractor_bound(p);
  const double K_formula = p.beta * p.beta * (p.rho + p.sigma) * (p.rho + p.sigma) / (4.0 * (p.beta - 1.0));
  const bool formula_ok = std::abs(K - K_formula) <= 1e-12 * K_formula && std::round(K * 100.0) / 100.0 == 1540.27;

  EnsembleSpec spec;
  spec.n_refs = 20;
  spec.seed = 2024;
  spec.spin_up = 100.0;
  spec.horizon = 10.0;
  spec.record_stride = 0.01;
  const Ensemble e = generate_ensemble(spec, SystemSpec{}, IntegratorConfig{1e-10, 1e-10, 0.01, 0.01});
  double worst = 0.0, shifted = 0.0;
  for (const auto& r : e.refs) {
    for (const auto& s : r.states) {
      worst = std::max(worst, s.squaredNorm());
      shifted = std::max(shifted, s[0] * s[0] + s[1] * s[1] + std::pow(s[2] - p.rho - p.sigma, 2));
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = formula_ok && e.refs.size() == 20 && worst <= 1540.27 * (1.0 + 1e-6) && secs < 10.0;
  return {ok, "K = " + num(K) + ", max x^2+y^2+z^2 = " + num(worst) + " over 20 refs (max x^2+y^2+(z-rho-sigma)^2 = " +
                  num(shifted) + "), " + num(secs) + " s"};
}

// 2 ------------------------------------------------------------------------
Outcome continuous_decay() {
  const auto t0 = std::chrono::steady_clock::now();
  const Lorenz63Params p;
  const double mu = 1.05 * theory_bounds(p, TheoryCase::continuous_x, 1.0, 1.0).mu_min;
  VerifyOptions o;
  o.n_refs = 10;
  o.duration = 3.0;
  o.slack = 0.01;
  const VerificationReport r = verify_theorem(TheoryCase::continuous_x, p, mu, o.sample_stride, o);
  const double secs = seconds_since(t0);
  const bool ok = r.passed && r.hypotheses_satisfied && r.bounds.c == 1.0 && r.max_envelope_ratio <= 1.01 &&
                  r.n_refs == 10 && secs < 120.0;
  return {ok, "mu = " + num(mu) + ", max V/(e^-t V0) = " + num(r.max_envelope_ratio) + ", fitted rate " +
                  num(r.fitted_rate) + ", " + num(secs) + " s"};
}

// 3 ------------------------------------------------------------------------
Outcome window_contraction() {
  const auto t0 = std::chrono::steady_clock::now();
  const Lorenz63Params p;
  const double mu = 1.05 * theory_bounds(p, TheoryCase::discrete_x, 1.0, 1.0).mu_min;
  const double delta = theory_delta_max(p, TheoryCase::discrete_x, mu);
  const double s = p.sigma;
  const double delta_hand = std::min({1.0 / (2.0 * mu), 1.0 / (64.0 * (s + mu) * (s + mu)), 1.0 / (32.0 * mu * s * s)});
  VerifyOptions o;
  o.n_windows = 100;
  o.slack = 0.0;
  const VerificationReport r = verify_theorem(TheoryCase::discrete_x, p, mu, delta, o);
  const bool ok = r.hypotheses_satisfied && r.violations == 0 && r.n_windows == 100 &&
                  r.max_window_ratio <= r.bounds.gamma && std::abs(delta / delta_hand - 1.0) < 0.5;
  return {ok, "mu = " + num(mu) + ", delta = " + num(delta) + " (hand bound " + num(delta_hand) +
                  "), gamma - 1 = " + num(r.bounds.gamma - 1.0) + ", max V(t_n+1)/V(t_n) - 1 = " + num(r.max_window_ratio - 1.0) +
                  ", " + std::to_string(r.violations) + " violations, " + num(seconds_since(t0)) + " s"};
}

// 4 ------------------------------------------------------------------------
Outcome nudged_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  const Lorenz63Params p;
  const double mu = 1.05 * theory_bounds(p, TheoryCase::discrete_yz, 1.0, 1.0).mu_min;
  const double delta = theory_delta_max(p, TheoryCase::discrete_yz, mu);
  VerifyOptions o;
  o.n_windows = 100;
  const VerificationReport r = verify_theorem(TheoryCase::discrete_yz, p, mu, delta, o);
  const double K5 = 5.0 * lorenz63_attractor_bound(p);
  const double secs = seconds_since(t0);
  const bool ok = r.hypotheses_satisfied && r.max_nudged_norm_sq <= K5 && secs < 120.0;
  return {ok, "mu = " + num(mu) + ", delta = " + num(delta) + ", max |w|^2 = " + num(r.max_nudged_norm_sq) +
                  " vs 5K = " + num(K5) + ", " + num(secs) + " s"};
}

// 5, 6, 9 -------------------------------------------------------------------
std::map<std::string, ExperimentResult>& experiments() {
  static std::map<std::string, ExperimentResult> cache;
  return cache;
}

const ExperimentResult& experiment(const std::string& label, const PipelineConfig& cfg) {
  auto& cache = experiments();
  if (auto it = cache.find(label); it != cache.end()) return it->second;
  const fs::path out = fs::path("acceptance_runs") / label;
  std::cerr << "running " << label << " (artifacts in " << fs::absolute(out).string() << ")\n";
  return cache.emplace(label, run_experiment(cfg, label, 1, out, &std::cerr)).first->second;
}

bool table_entry(const ExperimentResult& r, double published, double band, double ratio, std::string& detail) {
  const double nud = r.nudging.rmse_state;
  const double dnn = r.dnn.rmse_state;
  const bool nud_ok = std::isfinite(nud) && std::abs(nud - published) <= band * published;
  const bool dnn_ok = std::isfinite(dnn) && r.dnn_failures == 0 && dnn <= ratio * nud;
  detail += r.label + ": nudging " + num(nud) + " (published " + num(published) + " +/- " +
            num(100 * band) + "%), DNN " + num(dnn) + " = " + num(dnn / nud) + "x nudging (limit " + num(ratio) +
            "x), " + num(r.seconds / 60.0) + " min; ";
  return nud_ok && dnn_ok;
}

Outcome table1() {
  std::string detail;
  bool ok = table_entry(experiment("lorenz63_x", PipelineConfig::lorenz63(1)), 6.0782, 0.25, 1.25, detail);
  ok = table_entry(experiment("lorenz63_y", PipelineConfig::lorenz63(2)), 5.7953, 0.25, 1.25, detail) && ok;
  return {ok, detail};
}

Outcome table2() {
  std::string detail;
  bool ok = table_entry(experiment("lorenz96_20", PipelineConfig::lorenz96(20)), 11.9754, 0.30, 1.8, detail);
  ok = table_entry(experiment("lorenz96_13", PipelineConfig::lorenz96(13)), 25.1511, 0.30, 1.8, detail) && ok;
  return {ok, detail};
}

Outcome bias_ordering() {
  const ExperimentResult& r = experiment("lorenz63_x", PipelineConfig::lorenz63(1));
  const TrainReport& t = r.train_reports.at(0);
  const bool trained_ok = t.bias_violation_sq <= 1e-8 * t.bias_sq_sum;

  ResNetParams ordered = box_init(ResNetArch::hidden(4, 3, 50, 3), 99);
  for (int l = 0; l < 3; ++l) {
    auto b = ordered.bias(l);
    std::sort(b.data(), b.data() + b.size());
  }
  const double zero = bias_order_penalty(ordered, 1e9);
  return {trained_ok && zero == 0.0, "trained: sum min(db,0)^2 = " + num(t.bias_violation_sq) + " vs 1e-8 * sum b^2 = " +
                                         num(1e-8 * t.bias_sq_sum) + "; ordered set penalty = " + num(zero)};
}

// 7 ------------------------------------------------------------------------
// Pre-activations of every hidden layer for one batch, from the layer equations.
std::vector<Eigen::MatrixXd> pre_activations(const ResNetParams& p, const Eigen::MatrixXd& x) {
  const auto& a = p.arch();
  std::vector<Eigen::MatrixXd> zs;
  Eigen::MatrixXd z = (p.weight(0) * x).colwise() + Eigen::VectorXd(p.bias(0));
  Eigen::MatrixXd y = z.unaryExpr([&](double v) { return activation(v, a.eps); });
  zs.push_back(z);
  for (int l = 1; l <= a.layers() - 2; ++l) {
    z = (p.weight(l) * y).colwise() + Eigen::VectorXd(p.bias(l));
    zs.push_back(z);
    y += a.tau * z.unaryExpr([&](double v) { return activation(v, a.eps); });
  }
  return zs;
}

bool near_kink(const ResNetParams& p, const Eigen::MatrixXd& x, double margin) {
  const double e = p.arch().eps;
  for (const auto& z : pre_activations(p, x)) {
    if (((z.array().abs() - e).abs() < margin).any()) return true;
  }
  return false;
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Philox g(31337, 7);
  double worst = 0.0;
  int configs = 0, redraws = 0;
  while (configs < 100) {
    const int n_in = 1 + static_cast<int>(g.below(6));
    const int n_out = 1 + static_cast<int>(g.below(4));
    const int depth = 1 + static_cast<int>(g.below(4));
    const int width = 2 + static_cast<int>(g.below(12));
    const int n = 1 + static_cast<int>(g.below(16));
    const double tau = 0.2 + 1.3 * g.uniform();
    const ResNetParams p = box_init(ResNetArch::hidden(n_in, depth, width, n_out, tau, 0.01), 1000 + configs);
    Batch b{Eigen::MatrixXd(n_in, n), Eigen::MatrixXd(n_out, n)};
    for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = 2.0 * g.normal();
    for (Eigen::Index i = 0; i < b.targets.size(); ++i) b.targets.data()[i] = g.normal();
    if (near_kink(p, b.inputs, 1e-4)) {
      ++redraws;
      continue;
    }
    const LossConfig cfg{1e-3, 10.0, true};
    const Eigen::VectorXd grad = gradient(p, b, cfg);
    Eigen::VectorXd fd(grad.size());
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(p.flat()[k]));
      ResNetParams pp = p, pm = p;
      pp.flat()[k] += h;
      pm.flat()[k] -= h;
      fd[k] = (loss(pp, b, cfg) - loss(pm, b, cfg)) / (2.0 * h);
    }
    worst = std::max(worst, (grad - fd).norm() / std::max(fd.norm(), 1e-300));
    ++configs;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 30.0, std::to_string(configs) + " configurations (" + std::to_string(redraws) +
                                           " redrawn near kinks), max relative error " + num(worst) + ", " +
                                           num(secs) + " s"};
}

// 8 ------------------------------------------------------------------------
Outcome activation_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  double c1_gap = 0.0;
  for (double e : {1e-3, 0.01, 0.1, 1.0}) {
    // Limits of the quadratic branch at the boundary against the neighbouring branches.
    const auto quad = [e](double x) { return x * x / (4.0 * e) + 0.5 * x + 0.25 * e; };
    const auto dquad = [e](double x) { return x / (2.0 * e) + 0.5; };
    c1_gap = std::max({c1_gap, std::abs(quad(e) - e), std::abs(quad(-e) - 0.0), std::abs(dquad(e) - 1.0),
                       std::abs(dquad(-e) - 0.0), std::abs(activation(e, e) - e), std::abs(activation(-e, e)),
                       std::abs(activation_deriv(e, e) - 1.0), std::abs(activation_deriv(-e, e))});
  }

  const double e = 0.01;
  const int n = 1'000'000;
  Eigen::MatrixXd grid(1, n);
  for (int i = 0; i < n; ++i) grid(0, i) = -5.0 * e + 10.0 * e * i / (n - 1);
  // Batched path: a 1-1-1 network with unit weights returns the activation itself.
  ResNetParams unit(ResNetArch{{1, 1, 1}, 1.0, e});
  unit.weight(0)(0, 0) = 1.0;
  unit.weight(1)(0, 0) = 1.0;
  const Eigen::MatrixXd batched = forward(unit, grid);
  double lo = 1e300, hi = -1e300, path_gap = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = grid(0, i);
    const double gap = activation(x, e) - std::max(0.0, x);
    lo = std::min(lo, gap);
    hi = std::max(hi, gap);
    path_gap = std::max(path_gap, std::abs(batched(0, i) - activation(x, e)));
  }
  const double secs = seconds_since(t0);
  const bool ok = c1_gap <= 1e-14 && lo >= 0.0 && hi <= e / 4.0 && path_gap <= 1e-15 && secs < 5.0;
  return {ok, "C1 gap " + num(c1_gap) + ", sigma - relu in [" + num(lo) + ", " + num(hi) + "] vs [0, " + num(e / 4) +
                  "], batched vs scalar " + num(path_gap) + ", " + num(secs) + " s"};
}

// 10 -----------------------------------------------------------------------
struct CliRun {
  int code = -1;
  fs::path dir;
};

CliRun cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / ("nudgenet_accept_" + std::to_string(::getpid()) + ".txt");
  const std::string cmd = std::string(NUDGENET_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.dir = std::string(io::trim(io::read_file(out)));
  fs::remove(out);
  return r;
}

Outcome determinism() {
  const fs::path base = fs::absolute("acceptance_runs/determinism");
  fs::remove_all(base);
  const fs::path cfg = base / "config.ini";
  fs::create_directories(base);
  PipelineConfig c = PipelineConfig::lorenz63(1);
  c.ensemble.n_refs = 40;
  c.training.max_iters = 200;
  c.evaluation.n_test = 4;
  c.set_seed(123);
  io::write_file(cfg, c.to_ini());

  const std::string common = "--config " + cfg.string() + " --out " + base.string();
  const CliRun d1 = cli("build-dataset " + common + " --jobs 1");
  const CliRun d2 = cli("build-dataset " + common + " --jobs 2");
  if (d1.code != 0 || d2.code != 0) return {false, "build-dataset failed"};
  const std::string bytes1 = io::read_file(d1.dir / "dataset.bin");
  const bool data_same = bytes1 == io::read_file(d2.dir / "dataset.bin");

  const std::string ds = (d1.dir / "dataset.bin").string();
  const CliRun t1 = cli("train " + common + " --dataset " + ds);
  const CliRun t2 = cli("train " + common + " --dataset " + ds);
  if (t1.code != 0 || t2.code != 0) return {false, "train failed"};
  const Surrogate m1 = load_model(t1.dir / "models" / "model.bin");
  const Surrogate m2 = load_model(t2.dir / "models" / "model.bin");
  const bool params_same = parameter_block(m1) == parameter_block(m2);
  const bool files_same = io::read_file(t1.dir / "models" / "model.bin") == io::read_file(t2.dir / "models" / "model.bin");
  return {data_same && params_same && files_same,
          std::string("dataset ") + (data_same ? "identical" : "DIFFERS") + " (" + std::to_string(bytes1.size()) +
              " bytes, jobs 1 vs 2), parameter block " + (params_same ? "identical" : "DIFFERS") + ", model file " +
              (files_same ? "identical" : "DIFFERS")};
}

const fs::path kResults = "acceptance_results";

fs::path result_file(int id) { return kResults / ("criterion_" + std::to_string(id) + ".txt"); }

int summary(int n_criteria) {
  int bad = 0;
  for (int id = 1; id <= n_criteria; ++id) {
    if (!fs::exists(result_file(id))) {
      std::cout << "FAIL criterion " << id << ": not run\n";
      ++bad;
      continue;
    }
    const std::string line(io::trim(io::read_file(result_file(id))));
    std::cout << line << '\n';
    if (line.rfind("PASS", 0) != 0) ++bad;
  }
  std::cout << (n_criteria - bad) << " of " << n_criteria << " criteria passed\n";
  return bad == 0 ? 0 : 1;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "attractor bound", attractor_bound},
      {2, "continuous-x exponential decay", continuous_decay},
      {3, "discrete-x per-window contraction", window_contraction},
      {4, "discrete-yz nudged-solution bound", nudged_bound},
      {5, "Lorenz 63 table reproduction", table1},
      {6, "Lorenz 96 table reproduction (20 and 13 observations)", table2},
      {7, "gradient correctness", gradient_check},
      {8, "activation properties", activation_properties},
      {9, "bias ordering", bias_ordering},
      {10, "determinism of build-dataset and train", determinism},
  };
  if (argc == 2 && std::string(argv[1]) == "--summary") return summary(static_cast<int>(all.size()));
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  fs::create_directories(kResults);

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::string line =
        std::string(o.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(c.id) + " (" + c.name + "): " + o.detail;
    std::cout << line << std::endl;
    io::write_file(result_file(c.id), line + "\n");
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
