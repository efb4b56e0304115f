#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nudgenet {

/// Dense system state. Its size is the state dimension.
using State = Eigen::VectorXd;

/// Right-hand side of an autonomous or time-dependent ODE, written into `dydt`.
using VectorField = std::function<void(double t, const State& y, State& dydt)>;

/// Thrown for malformed inputs (dimension mismatches, out-of-range parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Lorenz63Params {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

struct Lorenz96Params {
  double forcing = 10.0;
  int dim = 40;
};

/// Time-stamped sequence of states with strictly increasing times.
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] bool empty() const { return times.empty(); }
  [[nodiscard]] int dim() const {
    return states.empty() ? 0 : static_cast<int>(states.front().size());
  }
  [[nodiscard]] const State& back() const { return states.back(); }

  void push_back(double t, State s) {
    times.push_back(t);
    states.push_back(std::move(s));
  }

  /// Throws InvalidInput unless times increase strictly and dimensions agree.
  void validate() const;
};

State lorenz63_rhs(const State& state, const Lorenz63Params& params);
State lorenz96_rhs(const State& state, const Lorenz96Params& params);

void lorenz63_rhs(const State& state, const Lorenz63Params& params, State& out);
void lorenz96_rhs(const State& state, const Lorenz96Params& params, State& out);

VectorField lorenz63_field(const Lorenz63Params& params);
VectorField lorenz96_field(const Lorenz96Params& params);

/// Attractor radius bound K = beta^2 (rho + sigma)^2 / (4 (beta - 1)).
/// Requires beta > 1.
double lorenz63_attractor_bound(const Lorenz63Params& params);

/// Identifies which model a config refers to.
enum class SystemKind { lorenz63, lorenz96 };

struct SystemSpec {
  SystemKind kind = SystemKind::lorenz63;
  Lorenz63Params l63;
  Lorenz96Params l96;

  [[nodiscard]] int dim() const { return kind == SystemKind::lorenz63 ? 3 : l96.dim; }
  [[nodiscard]] VectorField field() const;
  [[nodiscard]] std::string name() const;
};

}  // namespace nudgenet
