#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace nudgenet {

/// Residual network layout.
///
///   y_1     = act(W_0 y_0 + b_0)
///   y_{l+1} = y_l + tau * act(W_l y_l + b_l)      l = 1 .. L-2
///   output  = W_{L-1} y_{L-1}                      (no bias, no activation)
///
/// widths = (n_0, n_1, ..., n_L); the residual layers need n_l == n_{l+1}.
struct ResNetArch {
  std::vector<int> widths;
  double tau = 1.0;
  double eps = 0.01;

  /// L, the number of weight matrices.
  [[nodiscard]] int layers() const { return static_cast<int>(widths.size()) - 1; }
  [[nodiscard]] int input_dim() const { return widths.front(); }
  [[nodiscard]] int output_dim() const { return widths.back(); }
  [[nodiscard]] Eigen::Index param_count() const;
  void validate() const;

  /// (n_in, hidden x depth, n_out)
  static ResNetArch hidden(int n_in, int depth, int width, int n_out, double tau = 1.0,
                           double eps = 0.01);

  friend bool operator==(const ResNetArch&, const ResNetArch&) = default;
};

/// Smoothed ReLU: max{0, x} for |x| > eps, x^2/(4 eps) + x/2 + eps/4 otherwise.
inline double activation(double x, double eps) {
  if (x > eps) return x;
  if (x < -eps) return 0.0;
  return x * x / (4.0 * eps) + 0.5 * x + 0.25 * eps;
}

inline double activation_deriv(double x, double eps) {
  if (x > eps) return 1.0;
  if (x < -eps) return 0.0;
  return x / (2.0 * eps) + 0.5;
}

/// All weights and biases packed in one flat vector (the optimiser's view).
/// Layer l stores W_l column-major (n_{l+1} x n_l) followed by b_l when l < L-1.
class ResNetParams {
 public:
  ResNetParams() = default;
  explicit ResNetParams(ResNetArch arch);  // zero-initialised

  [[nodiscard]] const ResNetArch& arch() const { return arch_; }
  [[nodiscard]] Eigen::VectorXd& flat() { return flat_; }
  [[nodiscard]] const Eigen::VectorXd& flat() const { return flat_; }

  [[nodiscard]] Eigen::Map<Eigen::MatrixXd> weight(int layer);
  [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  /// Only layers 0 .. L-2 have biases.
  [[nodiscard]] Eigen::Map<Eigen::VectorXd> bias(int layer);
  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  [[nodiscard]] Eigen::Index weight_offset(int layer) const { return w_off_[static_cast<std::size_t>(layer)]; }
  [[nodiscard]] Eigen::Index bias_offset(int layer) const { return b_off_[static_cast<std::size_t>(layer)]; }

 private:
  ResNetArch arch_;
  Eigen::VectorXd flat_;
  std::vector<Eigen::Index> w_off_, b_off_;
};

/// A batch stores one sample per column.
struct Batch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  [[nodiscard]] Eigen::Index size() const { return inputs.cols(); }
};

struct LossConfig {
  double lambda = 1e-6;
  double gamma_penalty = 100.0;
  bool bias_ordering = true;

  void validate() const;
};

struct LossParts {
  double data = 0.0;
  double regularization = 0.0;
  double penalty = 0.0;
  [[nodiscard]] double total() const { return data + regularization + penalty; }
};

/// Network output for one input vector.
Eigen::VectorXd forward(const ResNetParams& params, const Eigen::VectorXd& input);
/// Outputs for a batch of inputs (one per column).
Eigen::MatrixXd forward(const ResNetParams& params, const Eigen::MatrixXd& inputs);

/// (1/2N) sum ||y_L - target||^2.
double data_loss(const ResNetParams& params, const Batch& batch);
/// (lambda/2) sum over all parameters of |p| + p^2.
double regularization(const ResNetParams& params, double lambda);
/// (gamma/2) sum_l sum_j min{b_l^{j+1} - b_l^j, 0}^2 over l = 0 .. L-2.
double bias_order_penalty(const ResNetParams& params, double gamma);

LossParts loss_parts(const ResNetParams& params, const Batch& batch, const LossConfig& cfg);
double loss(const ResNetParams& params, const Batch& batch, const LossConfig& cfg);

/// Loss value and its gradient (same layout as params.flat()). The L1 term
/// uses the subgradient sign(p) with sign(0) = 0.
double loss_and_gradient(const ResNetParams& params, const Batch& batch, const LossConfig& cfg,
                         Eigen::VectorXd& grad);
Eigen::VectorXd gradient(const ResNetParams& params, const Batch& batch, const LossConfig& cfg);

struct InitOptions {
  /// Box initialisation: each hidden neuron's hyperplane passes through a point
  /// drawn uniformly from the box of its expected input range. When false,
  /// weights are He-style uniform and biases zero.
  bool box = true;
  /// Reorder hidden neurons of every layer so biases start out nondecreasing.
  bool sort_biases = true;
};

ResNetParams box_init(const ResNetArch& arch, std::uint64_t seed, std::uint64_t stream = 0,
                      const InitOptions& opts = {});

}  // namespace nudgenet
