#include "nudgenet/dynamics.hpp"

#include <cmath>

namespace nudgenet {

void Trajectory::validate() const {
  if (times.size() != states.size()) {
    throw InvalidInput("trajectory: times and states differ in length");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw InvalidInput("trajectory: times must increase strictly");
    }
    if (states[k].size() != states[0].size()) {
      throw InvalidInput("trajectory: state dimension changes along the trajectory");
    }
  }
}

void lorenz63_rhs(const State& s, const Lorenz63Params& p, State& out) {
  if (s.size() != 3) {
    throw InvalidInput("lorenz63_rhs: state must have dimension 3, got " +
                       std::to_string(s.size()));
  }
  out.resize(3);
  const double x = s[0], y = s[1], z = s[2];
  out[0] = p.sigma * (y - x);
  out[1] = x * (p.rho - z) - y;
  out[2] = x * y - p.beta * z;
}

State lorenz63_rhs(const State& state, const Lorenz63Params& params) {
  State out(3);
  lorenz63_rhs(state, params, out);
  return out;
}

void lorenz96_rhs(const State& s, const Lorenz96Params& p, State& out) {
  if (p.dim < 4) {
    throw InvalidInput("lorenz96_rhs: dimension must be at least 4");
  }
  if (s.size() != p.dim) {
    throw InvalidInput("lorenz96_rhs: state dimension " + std::to_string(s.size()) +
                       " does not match model dimension " + std::to_string(p.dim));
  }
  const int d = p.dim;
  out.resize(d);
  for (int i = 0; i < d; ++i) {
    const double xp1 = s[(i + 1) % d];
    const double xm1 = s[(i + d - 1) % d];
    const double xm2 = s[(i + d - 2) % d];
    out[i] = (xp1 - xm2) * xm1 - s[i] + p.forcing;
  }
}

State lorenz96_rhs(const State& state, const Lorenz96Params& params) {
  State out(params.dim);
  lorenz96_rhs(state, params, out);
  return out;
}

VectorField lorenz63_field(const Lorenz63Params& params) {
  return [params](double, const State& y, State& dydt) { lorenz63_rhs(y, params, dydt); };
}

VectorField lorenz96_field(const Lorenz96Params& params) {
  return [params](double, const State& y, State& dydt) { lorenz96_rhs(y, params, dydt); };
}

double lorenz63_attractor_bound(const Lorenz63Params& p) {
  if (!(p.beta > 1.0)) {
    throw InvalidInput("attractor bound requires beta > 1");
  }
  const double s = p.rho + p.sigma;
  return p.beta * p.beta * s * s / (4.0 * (p.beta - 1.0));
}

VectorField SystemSpec::field() const {
  return kind == SystemKind::lorenz63 ? lorenz63_field(l63) : lorenz96_field(l96);
}

std::string SystemSpec::name() const {
  return kind == SystemKind::lorenz63 ? "lorenz63" : "lorenz96";
}

}  // namespace nudgenet
