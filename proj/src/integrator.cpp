#include "nudgenet/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nudgenet {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

// PI controller constants (Hairer & Wanner, DOPRI5 defaults).
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 10.0;

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0 && rel_tol < 1.0) || !(abs_tol > 0.0 && abs_tol < 1.0)) {
    throw InvalidInput("integrator: tolerances must lie in (0, 1)");
  }
  if (!(max_step > 0.0) || !(dense_output_stride > 0.0)) {
    throw InvalidInput("integrator: max_step and dense_output_stride must be positive");
  }
  if (max_steps <= 0) {
    throw InvalidInput("integrator: max_steps must be positive");
  }
}

DormandPrince::DormandPrince(VectorField field, State initial, double t0, IntegratorConfig config)
    : f_(std::move(field)), cfg_(config), t_(t0), y_(std::move(initial)) {
  cfg_.validate();
  if (!y_.allFinite()) {
    throw InvalidInput("integrator: initial state is not finite");
  }
  const auto n = y_.size();
  for (State* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y5_, &err_}) {
    v->resize(n);
  }
}

void DormandPrince::reset(double t, const State& y) {
  t_ = t;
  y_ = y;
  have_k1_ = false;
}

double DormandPrince::error_norm(const State& y_new) const {
  double acc = 0.0;
  const auto n = y_.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sk =
        cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y_[i]), std::abs(y_new[i]));
    const double r = err_[i] / sk;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

double DormandPrince::initial_step(double t_target) {
  const auto n = static_cast<double>(y_.size());
  auto scaled_norm = [&](const State& v) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_[i]);
      acc += (v[i] / sk) * (v[i] / sk);
    }
    return std::sqrt(acc / n);
  };
  const double span = t_target - t_;
  const double hmax = std::min(cfg_.max_step, span);
  const double dnf = scaled_norm(k1_);
  const double dny = scaled_norm(y_);
  double h = (dnf <= 1e-5 || dny <= 1e-5) ? 1e-6 : 0.01 * dny / dnf;
  h = std::min(h, hmax);
  tmp_ = y_ + h * k1_;
  f_(t_ + h, tmp_, k2_);
  ++evals_;
  const double der2 = scaled_norm(k2_ - k1_) / h;
  const double der12 = std::max(std::abs(der2), dnf);
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  return std::min({100.0 * h, h1, hmax});
}

void DormandPrince::stages(double h) {
  const double t = t_;
  tmp_ = y_ + h * a21 * k1_;
  f_(t + c2 * h, tmp_, k2_);
  tmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
  f_(t + c3 * h, tmp_, k3_);
  tmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
  f_(t + c4 * h, tmp_, k4_);
  tmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
  f_(t + c5 * h, tmp_, k5_);
  tmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
  f_(t + h, tmp_, k6_);
  y5_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
  f_(t + h, y5_, k7_);
  err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
  evals_ += 6;
}

void DormandPrince::advance_to(double t_target) {
  if (t_target < t_) {
    throw InvalidInput("integrator: cannot integrate backwards");
  }
  if (t_target == t_) {
    return;
  }
  if (!have_k1_) {
    f_(t_, y_, k1_);
    ++evals_;
    have_k1_ = true;
  }
  if (h_ <= 0.0) {
    h_ = initial_step(t_target);
  }
  std::int64_t steps = 0;
  while (t_ < t_target) {
    if (++steps > cfg_.max_steps) {
      throw IntegrationError("integrator: step budget exhausted", t_);
    }
    double h = std::min(h_, cfg_.max_step);
    bool last = false;
    if (t_ + 1.01 * h >= t_target) {
      h = t_target - t_;
      last = true;
    }
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_))) {
      throw IntegrationError("integrator: step size underflow at t = " + std::to_string(t_), t_);
    }
    stages(h);
    double err = error_norm(y5_);
    if (!std::isfinite(err) || !y5_.allFinite()) {
      err = std::numeric_limits<double>::infinity();
    }
    if (err <= 1.0) {
      const double fac =
          std::clamp(std::pow(err, kExpo) / std::pow(err_old_, kBeta) / kSafety,
                     1.0 / kFacMax, 1.0 / kFacMin);
      err_old_ = std::max(err, 1e-4);
      t_ = last ? t_target : t_ + h;
      y_.swap(y5_);
      k1_.swap(k7_);
      ++accepted_;
      // Keep the controller's proposal when the step was shortened to land.
      const double h_new = h / fac;
      if (!last || h_new < h_) {
        h_ = h_new;
      }
    } else {
      ++rejected_;
      const double fac = std::isfinite(err)
                             ? std::min(1.0 / kFacMin, std::pow(err, kExpo) / kSafety)
                             : 1.0 / kFacMin;
      h_ = h / fac;
    }
  }
}

std::vector<double> sample_grid(double t0, double t1, double stride) {
  if (!(t1 > t0)) {
    throw InvalidInput("integrate: t1 must exceed t0");
  }
  std::vector<double> grid;
  const double slack = 1e-9 * stride;
  for (std::int64_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * stride;
    if (t >= t1 - slack) {
      break;
    }
    grid.push_back(t);
  }
  grid.push_back(t1);
  return grid;
}

Trajectory integrate(const VectorField& field, const State& initial, double t0, double t1,
                     const IntegratorConfig& config) {
  const auto grid = sample_grid(t0, t1, config.dense_output_stride);
  DormandPrince stepper(field, initial, t0, config);
  Trajectory out;
  out.times.reserve(grid.size());
  out.states.reserve(grid.size());
  for (double t : grid) {
    stepper.advance_to(t);
    out.push_back(t, stepper.state());
  }
  return out;
}

State integrate_to(const VectorField& field, const State& initial, double t0, double t1,
                   const IntegratorConfig& config) {
  if (!(t1 > t0)) {
    throw InvalidInput("integrate: t1 must exceed t0");
  }
  DormandPrince stepper(field, initial, t0, config);
  stepper.advance_to(t1);
  return stepper.state();
}

State integrate_fixed_step(const VectorField& f, const State& initial, double t0, double t1,
                           int n_steps) {
  if (n_steps <= 0 || !(t1 > t0)) {
    throw InvalidInput("integrate_fixed_step: need n_steps > 0 and t1 > t0");
  }
  const double h = (t1 - t0) / n_steps;
  const auto n = initial.size();
  State y = initial, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), tmp(n);
  for (int s = 0; s < n_steps; ++s) {
    const double t = t0 + s * h;
    f(t, y, k1);
    tmp = y + h * a21 * k1;
    f(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, tmp, k6);
    y += h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
  }
  return y;
}

}  // namespace nudgenet
