#include "nudgenet/resnet.hpp"

#include "nudgenet/dynamics.hpp"
#include "nudgenet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nudgenet {

Eigen::Index ResNetArch::param_count() const {
  Eigen::Index n = 0;
  const int L = layers();
  for (int l = 0; l < L; ++l) {
    n += static_cast<Eigen::Index>(widths[l]) * widths[l + 1];
    if (l < L - 1) {
      n += widths[l + 1];
    }
  }
  return n;
}

void ResNetArch::validate() const {
  if (layers() < 2) {
    throw InvalidInput("resnet: need at least two weight layers (L >= 2)");
  }
  for (int w : widths) {
    if (w < 1) {
      throw InvalidInput("resnet: widths must be positive");
    }
  }
  for (int l = 1; l <= layers() - 2; ++l) {
    if (widths[l] != widths[l + 1]) {
      throw InvalidInput("resnet: residual layer " + std::to_string(l) + " must be square");
    }
  }
  if (!(tau > 0.0) || !(eps > 0.0)) {
    throw InvalidInput("resnet: tau and eps must be positive");
  }
}

ResNetArch ResNetArch::hidden(int n_in, int depth, int width, int n_out, double tau, double eps) {
  ResNetArch a;
  a.widths.push_back(n_in);
  for (int i = 0; i < depth; ++i) {
    a.widths.push_back(width);
  }
  a.widths.push_back(n_out);
  a.tau = tau;
  a.eps = eps;
  return a;
}

ResNetParams::ResNetParams(ResNetArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  const int L = arch_.layers();
  Eigen::Index off = 0;
  for (int l = 0; l < L; ++l) {
    w_off_.push_back(off);
    off += static_cast<Eigen::Index>(arch_.widths[l]) * arch_.widths[l + 1];
    if (l < L - 1) {
      b_off_.push_back(off);
      off += arch_.widths[l + 1];
    }
  }
  flat_ = Eigen::VectorXd::Zero(off);
}

Eigen::Map<Eigen::MatrixXd> ResNetParams::weight(int l) {
  return {flat_.data() + w_off_[static_cast<std::size_t>(l)], arch_.widths[l + 1], arch_.widths[l]};
}

Eigen::Map<const Eigen::MatrixXd> ResNetParams::weight(int l) const {
  return {flat_.data() + w_off_[static_cast<std::size_t>(l)], arch_.widths[l + 1], arch_.widths[l]};
}

Eigen::Map<Eigen::VectorXd> ResNetParams::bias(int l) {
  return {flat_.data() + b_off_[static_cast<std::size_t>(l)], arch_.widths[l + 1]};
}

Eigen::Map<const Eigen::VectorXd> ResNetParams::bias(int l) const {
  return {flat_.data() + b_off_[static_cast<std::size_t>(l)], arch_.widths[l + 1]};
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !(gamma_penalty >= 0.0)) {
    throw InvalidInput("loss: lambda and gamma must be nonnegative");
  }
}

namespace {

// Branch-free forms of activation() and activation_deriv() so Eigen vectorises them:
// sigma(x) = clamp(x + eps, 0, 2 eps)^2 / (4 eps) + max(x - eps, 0).
Eigen::MatrixXd act(const Eigen::MatrixXd& z, double eps) {
  const auto a = z.array();
  const auto c = (a + eps).max(0.0).min(2.0 * eps);
  return (c.square() * (0.25 / eps) + (a - eps).max(0.0)).matrix();
}

Eigen::MatrixXd act_deriv(const Eigen::MatrixXd& z, double eps) {
  return ((z.array() + eps) * (0.5 / eps)).max(0.0).min(1.0).matrix();
}

void check_batch(const ResNetParams& p, const Batch& b) {
  if (b.size() == 0) {
    throw InvalidInput("loss: empty batch");
  }
  if (b.inputs.rows() != p.arch().input_dim() || b.targets.rows() != p.arch().output_dim() ||
      b.targets.cols() != b.inputs.cols()) {
    throw InvalidInput("loss: batch shape does not match the network");
  }
}

// Hidden states y_1 .. y_{L-1} and activation slopes at z_0 .. z_{L-2}.
struct Tape {
  std::vector<Eigen::MatrixXd> y;  // y[0] unused (inputs passed separately)
  std::vector<Eigen::MatrixXd> dact;
};

Eigen::MatrixXd run_forward(const ResNetParams& p, const Eigen::MatrixXd& x, Tape* tape) {
  const auto& arch = p.arch();
  const int L = arch.layers();
  Eigen::MatrixXd z(arch.widths[1], x.cols());
  z.noalias() = p.weight(0) * x;
  z.colwise() += p.bias(0);
  Eigen::MatrixXd y = act(z, arch.eps);
  if (tape != nullptr) {
    tape->dact.assign(static_cast<std::size_t>(L - 1), {});
    tape->y.assign(static_cast<std::size_t>(L), {});
    tape->dact[0] = act_deriv(z, arch.eps);
  }
  for (int l = 1; l <= L - 2; ++l) {
    z.noalias() = p.weight(l) * y;
    z.colwise() += p.bias(l);
    if (tape != nullptr) {
      tape->y[static_cast<std::size_t>(l)] = y;
      tape->dact[static_cast<std::size_t>(l)] = act_deriv(z, arch.eps);
    }
    y += arch.tau * act(z, arch.eps);
  }
  if (tape != nullptr) {
    tape->y[static_cast<std::size_t>(L - 1)] = y;
  }
  return p.weight(L - 1) * y;
}

}  // namespace

Eigen::VectorXd forward(const ResNetParams& params, const Eigen::VectorXd& input) {
  if (input.size() != params.arch().input_dim()) {
    throw InvalidInput("forward: input has length " + std::to_string(input.size()) +
                       ", network expects " + std::to_string(params.arch().input_dim()));
  }
  return run_forward(params, input, nullptr);
}

Eigen::MatrixXd forward(const ResNetParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.arch().input_dim()) {
    throw InvalidInput("forward: input rows do not match the network");
  }
  return run_forward(params, inputs, nullptr);
}

double data_loss(const ResNetParams& params, const Batch& batch) {
  check_batch(params, batch);
  const Eigen::MatrixXd out = run_forward(params, batch.inputs, nullptr);
  return 0.5 * (out - batch.targets).squaredNorm() / static_cast<double>(batch.size());
}

double regularization(const ResNetParams& params, double lambda) {
  if (lambda == 0.0) {
    return 0.0;
  }
  const auto& f = params.flat();
  return 0.5 * lambda * (f.lpNorm<1>() + f.squaredNorm());
}

double bias_order_penalty(const ResNetParams& params, double gamma) {
  double acc = 0.0;
  const int L = params.arch().layers();
  for (int l = 0; l <= L - 2; ++l) {
    const auto b = params.bias(l);
    for (Eigen::Index j = 0; j + 1 < b.size(); ++j) {
      const double v = std::min(b[j + 1] - b[j], 0.0);
      acc += v * v;
    }
  }
  return 0.5 * gamma * acc;
}

LossParts loss_parts(const ResNetParams& params, const Batch& batch, const LossConfig& cfg) {
  cfg.validate();
  LossParts parts;
  parts.data = data_loss(params, batch);
  parts.regularization = regularization(params, cfg.lambda);
  parts.penalty = cfg.bias_ordering ? bias_order_penalty(params, cfg.gamma_penalty) : 0.0;
  return parts;
}

double loss(const ResNetParams& params, const Batch& batch, const LossConfig& cfg) {
  return loss_parts(params, batch, cfg).total();
}

double loss_and_gradient(const ResNetParams& params, const Batch& batch, const LossConfig& cfg,
                         Eigen::VectorXd& grad) {
  check_batch(params, batch);
  cfg.validate();
  const auto& arch = params.arch();
  const int L = arch.layers();
  const double n = static_cast<double>(batch.size());

  Tape tape;
  const Eigen::MatrixXd out = run_forward(params, batch.inputs, &tape);
  const Eigen::MatrixXd resid = out - batch.targets;
  double value = 0.5 * resid.squaredNorm() / n;

  ResNetParams g(arch);
  Eigen::MatrixXd gout = resid / n;
  g.weight(L - 1).noalias() = gout * tape.y[static_cast<std::size_t>(L - 1)].transpose();
  Eigen::MatrixXd dy = params.weight(L - 1).transpose() * gout;
  for (int l = L - 2; l >= 1; --l) {
    const auto ls = static_cast<std::size_t>(l);
    const Eigen::MatrixXd dz = arch.tau * dy.cwiseProduct(tape.dact[ls]);
    g.weight(l).noalias() = dz * tape.y[ls].transpose();
    g.bias(l) = dz.rowwise().sum();
    dy.noalias() += params.weight(l).transpose() * dz;
  }
  {
    const Eigen::MatrixXd dz = dy.cwiseProduct(tape.dact[0]);
    g.weight(0).noalias() = dz * batch.inputs.transpose();
    g.bias(0) = dz.rowwise().sum();
  }

  if (cfg.lambda > 0.0) {
    const auto& f = params.flat();
    value += regularization(params, cfg.lambda);
    g.flat() += 0.5 * cfg.lambda *
                (f.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }) +
                 2.0 * f);
  }
  if (cfg.bias_ordering && cfg.gamma_penalty > 0.0) {
    value += bias_order_penalty(params, cfg.gamma_penalty);
    for (int l = 0; l <= L - 2; ++l) {
      const auto b = params.bias(l);
      auto gb = g.bias(l);
      for (Eigen::Index j = 0; j + 1 < b.size(); ++j) {
        const double v = std::min(b[j + 1] - b[j], 0.0);
        if (v < 0.0) {
          gb[j + 1] += cfg.gamma_penalty * v;
          gb[j] -= cfg.gamma_penalty * v;
        }
      }
    }
  }
  grad = std::move(g.flat());
  return value;
}

Eigen::VectorXd gradient(const ResNetParams& params, const Batch& batch, const LossConfig& cfg) {
  Eigen::VectorXd g;
  loss_and_gradient(params, batch, cfg, g);
  return g;
}

ResNetParams box_init(const ResNetArch& arch, std::uint64_t seed, std::uint64_t stream,
                      const InitOptions& opts) {
  ResNetParams p(arch);
  Philox rng(seed, stream_id(StreamPurpose::init_params, stream));
  const int L = arch.layers();
  for (int l = 0; l < L; ++l) {
    auto W = p.weight(l);
    const auto n_in = W.cols();
    const auto n_out = W.rows();
    const bool hidden = l < L - 1;
    if (!hidden || !opts.box) {
      const double a = std::sqrt(6.0 / static_cast<double>(hidden ? n_in : n_in + n_out));
      for (Eigen::Index c = 0; c < n_in; ++c) {
        for (Eigen::Index r = 0; r < n_out; ++r) {
          W(r, c) = a * (2.0 * rng.uniform() - 1.0);
        }
      }
      if (hidden) {
        p.bias(l).setZero();
      }
    } else {
      // First layer sees standardised inputs in [-1, 1]^n; residual layers see
      // nonnegative activations, so their box is [0, 1]^n.
      const double lo = l == 0 ? -1.0 : 0.0;
      // Scaling a neuron leaves its hyperplane in place; residual layers are
      // damped so the identity path dominates in deep, narrow stacks.
      const double scale = l == 0 ? 1.0 : 1.0 / std::max(1, L - 2);
      auto b = p.bias(l);
      Eigen::VectorXd normal(n_in), point(n_in);
      for (Eigen::Index r = 0; r < n_out; ++r) {
        for (Eigen::Index c = 0; c < n_in; ++c) {
          normal[c] = rng.normal();
        }
        const double len = normal.norm();
        if (len > 0.0) {
          normal /= len;
        }
        for (Eigen::Index c = 0; c < n_in; ++c) {
          point[c] = lo + (1.0 - lo) * rng.uniform();
        }
        W.row(r) = scale * normal.transpose();
        b[r] = -scale * normal.dot(point);
      }
    }
    if (hidden && opts.sort_biases) {
      auto b = p.bias(l);
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n_out));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&b](Eigen::Index i, Eigen::Index j) { return b[i] < b[j]; });
      const Eigen::MatrixXd W_old = W;
      const Eigen::VectorXd b_old = b;
      for (Eigen::Index r = 0; r < n_out; ++r) {
        W.row(r) = W_old.row(order[static_cast<std::size_t>(r)]);
        b[r] = b_old[order[static_cast<std::size_t>(r)]];
      }
    }
  }
  return p;
}

}  // namespace nudgenet
