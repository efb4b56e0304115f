#include "nudgenet/evaluate.hpp"

#include "nudgenet/datagen.hpp"
#include "nudgenet/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nudgenet {

using nlohmann::json;

namespace {

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

// Index of the sample of `times` at time t, or npos.
std::size_t find_time(const std::vector<double>& times, double t) {
  auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9 * std::max(1.0, std::abs(t)));
  if (it != times.end() && same_time(*it, t)) return static_cast<std::size_t>(it - times.begin());
  return static_cast<std::size_t>(-1);
}

}  // namespace

RmseReport rmse(const std::vector<AssimilationRun>& runs, const std::vector<Trajectory>& refs,
                double k0_time, double horizon, const std::vector<int>& components) {
  if (runs.size() != refs.size()) {
    throw InvalidInput("rmse: " + std::to_string(runs.size()) + " runs but " +
                       std::to_string(refs.size()) + " references");
  }
  if (runs.empty()) throw InvalidInput("rmse: no runs");
  if (!(horizon >= k0_time)) throw InvalidInput("rmse: horizon precedes k0");
  RmseReport rep;
  rep.n_runs = runs.size();
  rep.k0_time = k0_time;
  rep.horizon_time = horizon;
  rep.method = to_string(runs.front().method);
  rep.observed_only = !components.empty();
  const int d = static_cast<int>(runs.front().states.empty() ? 0 : runs.front().states.front().size());
  if (components.empty()) {
    for (int i = 1; i <= d; ++i) rep.components.push_back(i);
  } else {
    rep.components = components;
  }
  for (int c : rep.components) {
    if (c < 1 || c > d) throw InvalidInput("rmse: component " + std::to_string(c) + " out of range");
  }

  double total = 0.0;
  for (std::size_t n = 0; n < runs.size(); ++n) {
    const auto& run = runs[n];
    const auto& ref = refs[n];
    if (run.times.empty() || run.times.back() < horizon - 1e-9 * std::max(1.0, horizon)) {
      throw InvalidInput("rmse: run " + std::to_string(n) + " does not reach the horizon");
    }
    std::vector<double> series;
    std::vector<double> times;
    for (std::size_t k = 0; k < run.times.size(); ++k) {
      const double t = run.times[k];
      if (t < k0_time - 1e-9 * std::max(1.0, std::abs(k0_time)) ||
          t > horizon + 1e-9 * std::max(1.0, horizon)) {
        continue;
      }
      const std::size_t j = find_time(ref.times, t);
      if (j == static_cast<std::size_t>(-1)) {
        throw InvalidInput("rmse: reference " + std::to_string(n) + " has no sample at t = " +
                           io::format_double(t));
      }
      if (ref.states[j].size() != d || run.states[k].size() != d) {
        throw InvalidInput("rmse: state dimension mismatch in run " + std::to_string(n));
      }
      double e = 0.0;
      for (int c : rep.components) {
        const double diff = run.states[k][c - 1] - ref.states[j][c - 1];
        e += diff * diff;
      }
      series.push_back(e);
      times.push_back(t);
    }
    if (series.empty()) throw InvalidInput("rmse: run " + std::to_string(n) + " has no samples in the window");
    if (n == 0) {
      rep.window_times = times;
    } else if (times.size() != rep.window_times.size()) {
      throw InvalidInput("rmse: runs sample the window differently");
    }
    for (double e : series) total += e;
    rep.n_terms += series.size() * rep.components.size();
    rep.per_run.push_back(std::move(series));
  }
  rep.rmse = std::sqrt(total / static_cast<double>(rep.n_terms));
  rep.rmse_state = std::sqrt(total * static_cast<double>(rep.components.size()) /
                             static_cast<double>(rep.n_terms));
  return rep;
}

json RmseReport::to_json() const {
  json j;
  j["rmse"] = rmse;
  j["rmse_state"] = rmse_state;
  j["n_runs"] = n_runs;
  j["k0_time"] = k0_time;
  j["horizon_time"] = horizon_time;
  j["method"] = method;
  j["components"] = components;
  j["observed_only"] = observed_only;
  j["n_terms"] = n_terms;
  j["averaging"] = {{"rmse", "mean over runs, times in [k0, horizon] and the listed components"},
                    {"rmse_state", "mean over runs and times of the squared state-error norm"}};
  return j;
}

TimeSeries error_energy(const Trajectory& run, const Trajectory& ref) {
  if (run.size() != ref.size()) {
    throw InvalidInput("error_energy: run has " + std::to_string(run.size()) + " samples, reference " +
                       std::to_string(ref.size()));
  }
  TimeSeries s;
  s.times.reserve(run.size());
  s.values.reserve(run.size());
  for (std::size_t k = 0; k < run.size(); ++k) {
    if (!same_time(run.times[k], ref.times[k])) {
      throw InvalidInput("error_energy: sampling grids differ at index " + std::to_string(k));
    }
    if (run.states[k].size() != ref.states[k].size()) {
      throw InvalidInput("error_energy: state dimension mismatch");
    }
    s.times.push_back(run.times[k]);
    s.values.push_back((run.states[k] - ref.states[k]).squaredNorm());
  }
  return s;
}

TimeSeries error_energy(const AssimilationRun& run, const Trajectory& ref) {
  // Restrict the reference to the run's times.
  Trajectory aligned;
  for (double t : run.times) {
    const std::size_t j = find_time(ref.times, t);
    if (j == static_cast<std::size_t>(-1)) {
      throw InvalidInput("error_energy: reference has no sample at t = " + io::format_double(t));
    }
    aligned.push_back(ref.times[j], ref.states[j]);
  }
  return error_energy(run.trajectory(), aligned);
}

std::string time_series_csv(const TimeSeries& s, const std::string& value_name) {
  std::string out = "t," + value_name + "\n";
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    out += io::format_double(s.times[k]) + ',' + io::format_double(s.values[k]) + '\n';
  }
  return out;
}

DecayFit fit_decay(const TimeSeries& series, double t_start, double t_end) {
  if (series.times.size() != series.values.size()) throw InvalidInput("fit_decay: ragged series");
  std::vector<double> ts, ys;
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const double t = series.times[k];
    if (t < t_start || t > t_end) continue;
    const double v = series.values[k];
    if (v < 1e-24) break;
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("fit_decay: V must be positive and finite");
    ts.push_back(t);
    ys.push_back(std::log(v));
  }
  if (ts.size() < 3) {
    throw InvalidInput("fit_decay: need at least 3 points, window has " + std::to_string(ts.size()));
  }
  const double n = static_cast<double>(ts.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    mt += ts[k];
    my += ys[k];
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    stt += (ts[k] - mt) * (ts[k] - mt);
    sty += (ts[k] - mt) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  DecayFit fit;
  const double slope = sty / stt;
  fit.fitted_rate = -slope;
  fit.window_start = ts.front();
  fit.window_end = ts.back();
  fit.n_points = ts.size();
  fit.r_squared = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
  return fit;
}

namespace {

ObservationOperator theory_operator(TheoryCase which) {
  return which == TheoryCase::discrete_yz ? ObservationOperator({2, 3}, 3) : ObservationOperator({1}, 3);
}

std::vector<Trajectory> theory_references(const Lorenz63Params& params, const VerifyOptions& opts,
                                          double horizon, double stride) {
  EnsembleSpec spec;
  spec.n_refs = opts.n_refs;
  spec.seed = opts.seed;
  spec.spin_up = opts.spin_up;
  spec.horizon = horizon;
  spec.record_stride = stride;
  spec.purpose = StreamPurpose::misc;
  SystemSpec sys;
  sys.kind = SystemKind::lorenz63;
  sys.l63 = params;
  Ensemble ens = generate_ensemble(spec, sys, opts.integ);
  if (!ens.failures.empty()) {
    throw IntegrationError("reference generation failed: " + ens.failures.front().message,
                           ens.failures.front().last_good_time);
  }
  return std::move(ens.refs);
}

}  // namespace

VerificationReport verify_theorem(TheoryCase which, const Lorenz63Params& params, double mu,
                                  double delta, const VerifyOptions& opts) {
  if (opts.n_refs < 1 || opts.n_windows < 1) throw InvalidInput("verify: need at least one run and window");
  VerificationReport rep;
  rep.bounds = theory_bounds(params, which, mu, delta);
  rep.hypotheses_satisfied = rep.bounds.admissible();
  rep.n_refs = opts.n_refs;
  const VectorField f = lorenz63_field(params);
  NudgingConfig cfg;
  cfg.mu = mu;
  cfg.delta = delta;
  cfg.op = theory_operator(which);
  const double c = rep.bounds.c;
  const double limit = 1.0 + opts.slack;

  try {
    if (which == TheoryCase::continuous_x) {
      const auto refs = theory_references(params, opts, opts.duration, opts.sample_stride);
      double rate_sum = 0.0;
      for (std::size_t r = 0; r < refs.size(); ++r) {
        const Trajectory w = run_continuous_nudging(refs[r], f, cfg, opts.integ);
        const TimeSeries v = error_energy(w, refs[r]);
        for (std::size_t k = 0; k < v.times.size(); ++k) {
          rep.max_nudged_norm_sq = std::max(rep.max_nudged_norm_sq, w.states[k].squaredNorm());
          const double envelope = std::exp(-c * v.times[k]) * v.values.front();
          const double ratio = v.values[k] / envelope;
          rep.max_envelope_ratio = std::max(rep.max_envelope_ratio, ratio);
          if (ratio > limit) ++rep.violations;
        }
        rate_sum += fit_decay(v, std::min(0.5, opts.duration / 4), opts.duration).fitted_rate;
      }
      rep.fitted_rate = rate_sum / static_cast<double>(refs.size());
    } else {
      rep.n_windows = opts.n_windows;
      const double horizon = static_cast<double>(opts.n_windows) * delta;
      const auto refs = theory_references(params, opts, horizon, delta);
      const double gamma = rep.bounds.gamma;
      for (std::size_t r = 0; r < refs.size(); ++r) {
        const ObservationSeries obs = observe(refs[r], cfg.op);
        State w = cfg.initial_state();
        double v_prev = (w - refs[r].states.front()).squaredNorm();
        rep.max_nudged_norm_sq = std::max(rep.max_nudged_norm_sq, w.squaredNorm());
        for (std::size_t n = 0; n + 1 < obs.size(); ++n) {
          Trajectory inner;
          try {
            w = solve_nudging_window(f, w, obs.values[n], obs.times[n], obs.times[n + 1], cfg,
                                     opts.integ, &inner);
          } catch (const IntegrationError& e) {
            rep.failure_window = n;
            throw;
          }
          for (const auto& s : inner.states) {
            rep.max_nudged_norm_sq = std::max(rep.max_nudged_norm_sq, s.squaredNorm());
          }
          const double v = (w - refs[r].states[n + 1]).squaredNorm();
          const double ratio = v_prev > 0.0 ? v / v_prev : 0.0;
          rep.max_window_ratio = std::max(rep.max_window_ratio, ratio);
          if (v > gamma * v_prev) ++rep.violations;
          v_prev = v;
        }
      }
    }
  } catch (const IntegrationError& e) {
    rep.failure = e.what();
    rep.passed = false;
    return rep;
  }
  rep.passed = rep.violations == 0;
  if (which == TheoryCase::discrete_yz && rep.max_nudged_norm_sq > rep.bounds.K_tilde) {
    rep.passed = false;
  }
  return rep;
}

json VerificationReport::to_json() const {
  json j;
  j["case"] = to_string(bounds.which);
  j["mu"] = bounds.mu;
  j["delta"] = bounds.delta;
  j["K"] = bounds.K;
  j["K_tilde"] = bounds.K_tilde;
  j["mu_min"] = bounds.mu_min;
  j["delta_max"] = std::isfinite(bounds.delta_max) ? json(bounds.delta_max) : json("inf");
  j["c"] = bounds.c;
  j["gamma"] = bounds.gamma;
  j["hypotheses_satisfied"] = hypotheses_satisfied;
  j["passed"] = passed;
  j["n_refs"] = n_refs;
  j["n_windows"] = n_windows;
  j["max_envelope_ratio"] = max_envelope_ratio;
  j["max_window_ratio"] = max_window_ratio;
  j["violations"] = violations;
  j["max_nudged_norm_sq"] = max_nudged_norm_sq;
  j["fitted_rate"] = fitted_rate;
  if (failure_window) j["failure_window"] = *failure_window;
  if (!failure.empty()) j["failure"] = failure;
  return j;
}

std::string VerificationReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << "  case=" << to_string(bounds.which)
     << "  mu=" << io::format_double(bounds.mu) << "  delta=" << io::format_double(bounds.delta)
     << "  hypotheses=" << (hypotheses_satisfied ? "satisfied" : "NOT satisfied");
  if (bounds.which == TheoryCase::continuous_x) {
    os << "  c=" << io::format_double(bounds.c)
       << "  max V/(e^-ct V0)=" << io::format_double(max_envelope_ratio)
       << "  fitted rate=" << io::format_double(fitted_rate);
  } else {
    os << "  gamma=" << io::format_double(bounds.gamma)
       << "  max V(n+1)/V(n)=" << io::format_double(max_window_ratio);
  }
  os << "  violations=" << violations << "  max|w|^2=" << io::format_double(max_nudged_norm_sq);
  if (!failure.empty()) os << "  failure: " << failure;
  return os.str();
}

std::string ResultTable::to_text() const {
  std::vector<std::size_t> width(columns.size() + 1, 0);
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << *v;
    return os.str();
  };
  for (const auto& [name, vals] : rows) width[0] = std::max(width[0], name.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    width[c + 1] = columns[c].size();
    for (const auto& row : rows) {
      if (c < row.second.size()) width[c + 1] = std::max(width[c + 1], cell(row.second[c]).size());
    }
  }
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, s.size()), ' '); };
  std::ostringstream os;
  if (!title.empty()) os << title << '\n';
  os << pad("", width[0]);
  for (std::size_t c = 0; c < columns.size(); ++c) os << "  " << pad(columns[c], width[c + 1]);
  os << '\n';
  for (const auto& [name, vals] : rows) {
    os << pad(name, width[0]);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      os << "  " << pad(c < vals.size() ? cell(vals[c]) : "-", width[c + 1]);
    }
    os << '\n';
  }
  return os.str();
}

json ResultTable::to_json() const {
  json j;
  j["title"] = title;
  j["columns"] = columns;
  json rs = json::array();
  for (const auto& [name, vals] : rows) {
    json r;
    r["name"] = name;
    json v = json::array();
    for (const auto& x : vals) v.push_back(x ? json(*x) : json(nullptr));
    r["values"] = v;
    rs.push_back(r);
  }
  j["rows"] = rs;
  return j;
}

}  // namespace nudgenet
