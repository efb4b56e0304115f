#pragma once

#include "nudgenet/datagen.hpp"
#include "nudgenet/resnet.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace nudgenet {

/// Fixed affine maps between data units and the network's coordinates:
/// net_in = (x - in_mean) / in_scale, y = out_mean + out_scale * net_out.
struct Standardizer {
  Eigen::VectorXd in_mean, in_scale, out_mean, out_scale;

  static Standardizer identity(int n_in, int n_out);
  /// Per-column mean and standard deviation (scale 1 where the deviation vanishes).
  static Standardizer fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

  [[nodiscard]] Eigen::MatrixXd to_net_inputs(const Eigen::MatrixXd& x) const;
  [[nodiscard]] Eigen::MatrixXd to_net_targets(const Eigen::MatrixXd& y) const;
  [[nodiscard]] Eigen::MatrixXd from_net_outputs(const Eigen::MatrixXd& y) const;
};

/// Trained one-step map: a ResNet plus its data standardisation.
struct Surrogate {
  ResNetParams params;
  Standardizer norm;
  /// 0 for a full-state model; i (1-based) for the reduced model of component i.
  int component = 0;
  std::string dataset_hash;
  nlohmann::json provenance = nlohmann::json::object();

  [[nodiscard]] int input_dim() const { return params.arch().input_dim(); }
  [[nodiscard]] int output_dim() const { return params.arch().output_dim(); }
  [[nodiscard]] Eigen::VectorXd predict(const Eigen::VectorXd& input) const;
  [[nodiscard]] Eigen::MatrixXd predict(const Eigen::MatrixXd& inputs) const;
};

/// Model file: magic "NGMODEL1", u64 JSON length, JSON header (architecture,
/// tau, eps, standardisation, provenance, dataset hash), u64 parameter count,
/// then the flat parameter block as little-endian float64.
std::string serialize_model(const Surrogate& model);
void save_model(const std::filesystem::path& path, const Surrogate& model);
Surrogate load_model(const std::filesystem::path& path);

/// Raw bytes of the parameter block only (used for determinism checks).
std::string parameter_block(const Surrogate& model);

/// Column-stacked batch from dataset samples.
Batch make_batch(const std::vector<TrainingSample>& samples);
Batch make_batch(const Dataset& data, const std::vector<std::size_t>& rows);

}  // namespace nudgenet
