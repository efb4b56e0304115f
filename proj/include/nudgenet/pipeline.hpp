#pragma once

#include "nudgenet/assimilate.hpp"
#include "nudgenet/config.hpp"
#include "nudgenet/evaluate.hpp"

#include <filesystem>
#include <optional>
#include <ostream>

namespace nudgenet {

/// Training references for a config (train_initial stream).
Ensemble make_train_ensemble(const PipelineConfig& cfg, int jobs);
/// Test references for a config (test_initial stream, evaluation horizon).
Ensemble make_test_ensemble(const PipelineConfig& cfg, int jobs);

/// Hash of an ensemble's serialised form.
std::string ensemble_hash(const std::vector<Trajectory>& refs);

/// Nudging data set for the config from the given references.
Dataset make_dataset(const PipelineConfig& cfg, const std::vector<Trajectory>& refs, int jobs,
                     std::ostream* log = nullptr);

/// One full-state network, or one reduced network per component.
struct TrainedModels {
  std::vector<Surrogate> models;
  std::vector<TrainReport> reports;
  std::vector<FamilyFailure> failures;
  bool reduced = false;

  /// Matches the provenance recorded by assimilate_dnn / assimilate_dnn_reduced.
  [[nodiscard]] std::string hash() const;
};

TrainedModels train_models(const Dataset& data, const PipelineConfig& cfg, int jobs,
                           std::ostream* log = nullptr);

/// Model directory: model.bin (full) or component_XX.bin (reduced).
void save_models(const std::filesystem::path& dir, const TrainedModels& m);
TrainedModels load_models(const std::filesystem::path& dir);

struct RunBatch {
  std::vector<AssimilationRun> runs;
  /// Indices of references whose run diverged or failed, with messages.
  std::vector<std::pair<std::size_t, std::string>> failures;
};

RunBatch run_nudging_batch(const PipelineConfig& cfg, const std::vector<Trajectory>& refs, int jobs);
RunBatch run_dnn_batch(const PipelineConfig& cfg, const TrainedModels& models,
                       const std::vector<Trajectory>& refs, int jobs);

/// RMSE over the successful runs of a batch.
RmseReport batch_rmse(const PipelineConfig& cfg, const RunBatch& batch,
                      const std::vector<Trajectory>& refs);

struct ExperimentResult {
  std::string label;
  RmseReport nudging;
  RmseReport dnn;
  std::size_t nudging_failures = 0;
  std::size_t dnn_failures = 0;
  std::vector<TrainReport> train_reports;
  double seconds = 0.0;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// End-to-end: references, dataset, training, test references, nudging and
/// DNN runs, RMSE. Artifacts are written under `out` when given.
ExperimentResult run_experiment(const PipelineConfig& cfg, const std::string& label, int jobs,
                                const std::optional<std::filesystem::path>& out = std::nullopt,
                                std::ostream* log = nullptr);

}  // namespace nudgenet
