#pragma once

#include "nudgenet/datagen.hpp"
#include "nudgenet/resnet.hpp"
#include "nudgenet/trainer.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace nudgenet {

/// Bad or unreadable configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimal INI reader: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Keys before the first header belong to the "" section.
class IniDocument {
 public:
  static IniDocument parse(const std::string& text);

  [[nodiscard]] bool has(const std::string& section, const std::string& key) const;
  [[nodiscard]] const std::string* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  [[nodiscard]] const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return data_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> data_;
};

struct EvaluationConfig {
  int n_test = 100;
  double test_init_std = 50.0;
  double k0 = 5.0;
  double horizon = 10.0;
  bool observed_only = false;
};

struct ArchConfig {
  int hidden_layers = 3;
  int width = 50;
  double tau = 1.0;
  double eps = 0.01;
  /// Lorenz 96: one network per component on its cyclic stencil.
  bool reduced = false;

  [[nodiscard]] ResNetArch make(int n_in, int n_out) const {
    return ResNetArch::hidden(n_in, hidden_layers, width, n_out, tau, eps);
  }
};

/// Everything a pipeline run needs, resolved with defaults.
struct PipelineConfig {
  std::uint64_t seed = 0;
  SystemSpec system;
  EnsembleSpec ensemble;
  ObservationOperator op;
  double mu = 30.0;
  double delta = 0.1;
  int windows = 15;
  /// The built-in recipes hold the observation and keep the state live; see
  /// docs/config.md for why.
  Innovation innovation = Innovation::held_observation;
  IntegratorConfig integ;
  ArchConfig arch;
  LossConfig loss;
  TrainConfig training;
  EvaluationConfig evaluation;

  /// Checks every embedded config; throws ConfigError.
  void validate() const;

  /// Sets the global seed and every seed derived from it.
  void set_seed(std::uint64_t s);

  [[nodiscard]] NudgingConfig nudging() const;
  [[nodiscard]] EnsembleSpec test_ensemble() const;

  /// Fully resolved config as INI text (defaults expanded, stable key order).
  [[nodiscard]] std::string to_ini() const;
  /// Hash of to_ini().
  [[nodiscard]] std::string hash() const;

  static PipelineConfig from_ini(const IniDocument& doc);
  static PipelineConfig from_text(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Built-in experiment recipes.
  static PipelineConfig lorenz63(int observed_component);  ///< 1 = x (mu 30), 2 = y (mu 10)
  static PipelineConfig lorenz96(int n_obs);               ///< 20, 13 or 4 observations
};

}  // namespace nudgenet
