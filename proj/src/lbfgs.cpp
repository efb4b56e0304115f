#include "nudgenet/lbfgs.hpp"

#include "nudgenet/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace nudgenet {

void LbfgsConfig::validate() const {
  if (memory < 1) throw InvalidInput("lbfgs: memory must be >= 1");
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw InvalidInput("lbfgs: need 0 < c1 < c2 < 1");
  if (max_line_search_evals < 2) throw InvalidInput("lbfgs: max_line_search_evals must be >= 2");
  if (!(max_step > 0.0)) throw InvalidInput("lbfgs: max_step must be positive");
}

Lbfgs::Lbfgs(Objective objective, Eigen::VectorXd x0, LbfgsConfig cfg)
    : obj_(std::move(objective)), cfg_(cfg), x_(std::move(x0)) {
  cfg_.validate();
  restart();
}

void Lbfgs::restart() {
  g_.resize(x_.size());
  f_ = obj_(x_, g_);
  ++evals_;
  s_.clear();
  y_.clear();
  rho_.clear();
}

Eigen::VectorXd Lbfgs::direction() const {
  // Two-loop recursion.
  Eigen::VectorXd q = g_;
  const std::size_t m = s_.size();
  std::vector<double> alpha(m);
  for (std::size_t i = m; i-- > 0;) {
    alpha[i] = rho_[i] * s_[i].dot(q);
    q -= alpha[i] * y_[i];
  }
  if (m > 0) {
    q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = rho_[i] * y_[i].dot(q);
    q += (alpha[i] - beta) * s_[i];
  }
  return -q;
}

double Lbfgs::eval(double alpha, Eigen::VectorXd& x, Eigen::VectorXd& g) {
  x = x_ + alpha * (*dir_);
  ++evals_;
  return obj_(x, g);
}

namespace {

// Minimiser of the cubic matching values and slopes at a and b, kept inside
// the middle 80% of the interval; bisection when the fit is unusable.
double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) {
      const double c = b - (b - a) * (db + d2 - d1) / denom;
      if (std::isfinite(c)) t = c;
    }
  }
  return std::clamp(t, lo + margin, hi - margin);
}

}  // namespace

bool Lbfgs::line_search(const Eigen::VectorXd& p, double alpha0, Eigen::VectorXd& x_new,
                        Eigen::VectorXd& g_new, double& f_new, bool& weak) {
  dir_ = &p;
  const double f0 = f_;
  const double d0 = g_.dot(p);
  weak = false;
  Eigen::VectorXd x_try(x_.size()), g_try(x_.size());
  Eigen::VectorXd x_lo, g_lo;
  Point lo{0.0, f0, d0};
  Point hi{0.0, f0, d0};
  bool bracketed = false;
  int evals = 0;

  auto armijo = [&](double a, double f) { return f <= f0 + cfg_.c1 * a * d0; };
  auto curvature = [&](double d) { return std::abs(d) <= -cfg_.c2 * d0; };

  double a = alpha0;
  while (evals < cfg_.max_line_search_evals) {
    if (bracketed) {
      if (std::abs(hi.a - lo.a) <= 1e-16 * std::max(1.0, std::abs(lo.a))) break;
      a = cubic_step(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d);
    }
    const double f = eval(a, x_try, g_try);
    ++evals;
    const double d = g_try.dot(p);
    const Point cur{a, f, d};

    if (!std::isfinite(f) || !armijo(a, f) || f >= lo.f) {
      // Too far: the step overshoots the region of sufficient decrease.
      hi = cur;
      if (!std::isfinite(f) || !std::isfinite(d)) {
        // No usable slope there; the cubic fit degrades to bisection.
        hi.f = std::numeric_limits<double>::max();
        hi.d = std::numeric_limits<double>::quiet_NaN();
      }
      bracketed = true;
      continue;
    }
    if (curvature(d)) {
      x_new = x_try;
      g_new = g_try;
      f_new = f;
      return true;
    }
    // Sufficient decrease without the curvature condition: becomes the new low end.
    x_lo = x_try;
    g_lo = g_try;
    if (bracketed) {
      if (d * (hi.a - lo.a) >= 0.0) hi = lo;
      lo = cur;
    } else if (d >= 0.0) {
      hi = lo;
      lo = cur;
      bracketed = true;
    } else {
      lo = cur;
      a = std::min(2.0 * a, cfg_.max_step);
      if (a == lo.a) break;
    }
  }
  if (lo.a > 0.0 && lo.f < f0) {
    x_new = std::move(x_lo);
    g_new = std::move(g_lo);
    f_new = lo.f;
    weak = true;
    return true;
  }
  return false;
}

StepStatus Lbfgs::step() {
  const double gnorm = g_.norm();
  if (gnorm == 0.0 || !std::isfinite(gnorm)) {
    return StepStatus::converged;
  }
  Eigen::VectorXd p = direction();
  if (!(g_.dot(p) < 0.0)) {
    // Memory produced an ascent direction; fall back to steepest descent.
    s_.clear();
    y_.clear();
    rho_.clear();
    p = -g_;
  }
  const double alpha0 = s_.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;
  Eigen::VectorXd x_new, g_new;
  double f_new = 0.0;
  bool weak = false;
  if (!line_search(p, alpha0, x_new, g_new, f_new, weak)) {
    s_.clear();
    y_.clear();
    rho_.clear();
    return StepStatus::line_search_failed;
  }
  Eigen::VectorXd s = x_new - x_;
  Eigen::VectorXd y = g_new - g_;
  const double sy = s.dot(y);
  if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
    if (static_cast<int>(s_.size()) == cfg_.memory) {
      s_.pop_front();
      y_.pop_front();
      rho_.pop_front();
    }
    s_.push_back(std::move(s));
    y_.push_back(std::move(y));
    rho_.push_back(1.0 / sy);
  }
  const bool stalled = f_new == f_ && x_new == x_;
  x_ = std::move(x_new);
  g_ = std::move(g_new);
  f_ = f_new;
  ++iters_;
  if (weak) ++weak_steps_;
  return stalled ? StepStatus::converged : StepStatus::ok;
}

}  // namespace nudgenet
