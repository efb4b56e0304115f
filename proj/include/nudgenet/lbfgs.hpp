#pragma once

#include <Eigen/Dense>

#include <deque>
#include <functional>

namespace nudgenet {

/// f(x), writing the gradient into g.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

struct LbfgsConfig {
  int memory = 20;
  double c1 = 1e-4;  ///< sufficient decrease
  double c2 = 0.9;   ///< curvature
  int max_line_search_evals = 30;
  double max_step = 1e10;

  void validate() const;
};

enum class StepStatus {
  ok,
  line_search_failed,  ///< no acceptable point; the iterate is unchanged
  converged,           ///< zero gradient or no representable progress
};

/// Limited-memory BFGS with a strong-Wolfe line search (bracketing phase
/// followed by cubic-interpolation zoom).
///
/// Driven one iteration at a time so the caller owns the stopping logic.
/// After a failed line search the curvature memory is dropped and the next
/// direction is steepest descent.
class Lbfgs {
 public:
  Lbfgs(Objective objective, Eigen::VectorXd x0, LbfgsConfig cfg = {});

  StepStatus step();

  /// Re-evaluates f and g at the current point and forgets the curvature
  /// pairs. Call after the objective itself changed.
  void restart();

  [[nodiscard]] const Eigen::VectorXd& x() const { return x_; }
  [[nodiscard]] double value() const { return f_; }
  [[nodiscard]] const Eigen::VectorXd& grad() const { return g_; }
  [[nodiscard]] long evaluations() const { return evals_; }
  [[nodiscard]] int iterations() const { return iters_; }
  /// Accepted steps that met sufficient decrease but not the curvature condition.
  [[nodiscard]] int weak_steps() const { return weak_steps_; }

 private:
  struct Point {
    double a, f, d;
  };

  double eval(double alpha, Eigen::VectorXd& x, Eigen::VectorXd& g);
  Eigen::VectorXd direction() const;
  /// Returns true on an accepted step, writing the new point into x_new, g_new, f_new.
  bool line_search(const Eigen::VectorXd& p, double alpha0, Eigen::VectorXd& x_new,
                   Eigen::VectorXd& g_new, double& f_new, bool& weak);

  Objective obj_;
  LbfgsConfig cfg_;
  Eigen::VectorXd x_, g_;
  double f_ = 0.0;
  std::deque<Eigen::VectorXd> s_, y_;
  std::deque<double> rho_;
  long evals_ = 0;
  int iters_ = 0;
  int weak_steps_ = 0;
  const Eigen::VectorXd* dir_ = nullptr;
};

}  // namespace nudgenet
