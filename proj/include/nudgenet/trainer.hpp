#pragma once

#include "nudgenet/datagen.hpp"
#include "nudgenet/model.hpp"
#include "nudgenet/resnet.hpp"

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace nudgenet {

enum class LineSearchKind { strong_wolfe };

struct TrainConfig {
  double split_fraction = 0.8;
  int patience = 400;
  int max_iters = 20000;
  int lbfgs_memory = 20;
  std::uint64_t seed = 0;
  LineSearchKind line_search = LineSearchKind::strong_wolfe;
  /// Standardise inputs and targets per component before training.
  bool standardize = true;
  /// Double the bias-ordering weight every this many iterations (0 disables).
  int penalty_double_every = 2000;
  /// Abort after this many line-search failures in a row.
  int max_consecutive_failures = 10;
  /// Progress line to the log stream every this many iterations (0 disables).
  int log_every = 0;

  void validate() const;
};

/// Disjoint train/validation index sets (indices into dataset.samples).
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Shuffles the distinct ref_ids with the seed and puts the first
/// round(fraction * refs) references on the training side. Throws
/// InvalidInput if either side would be empty.
Split split_by_reference(const Dataset& data, double fraction, std::uint64_t seed);

/// Stop once the monitored value has not improved for `patience` updates.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  /// Records the value at `iteration`; returns true when training should stop.
  bool update(int iteration, double value);

  [[nodiscard]] int best_iteration() const { return best_iter_; }
  [[nodiscard]] double best_value() const { return best_; }
  /// Whether the most recent update set a new best.
  [[nodiscard]] bool improved() const { return improved_; }

 private:
  int patience_;
  int best_iter_ = -1;
  double best_;
  bool improved_ = false;
};

struct LossRecord {
  int iteration = 0;
  double train = 0.0;       ///< J_gamma on the training set
  double validation = 0.0;  ///< data loss on the validation set
  double gamma = 0.0;
};

struct TrainReport {
  int iterations_run = 0;
  int best_iteration = 0;
  double best_validation_loss = 0.0;
  double final_training_loss = 0.0;
  /// Bias-ordering penalty of the returned parameters evaluated at gamma = 1.
  double bias_order_violation = 0.0;
  /// Sum over layers of min{b^{j+1} - b^j, 0}^2 and of b^2 (returned parameters).
  double bias_violation_sq = 0.0;
  double bias_sq_sum = 0.0;
  double wallclock_seconds = 0.0;
  std::vector<LossRecord> history;
  int line_search_failures = 0;
  int weak_steps = 0;
  bool aborted = false;
  std::string stop_reason;
  /// Validation RMSE per output component in data units.
  Eigen::VectorXd validation_rmse;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
};

struct TrainResult {
  Surrogate model;
  TrainReport report;
};

/// Core loop on explicit batches (data units). Starts from `init`, which must
/// match `arch`.
TrainResult train_batches(const Batch& train_set, const Batch& validation_set,
                          const ResNetParams& init, const LossConfig& loss_cfg,
                          const TrainConfig& train_cfg, std::ostream* log = nullptr);

/// Splits by reference, box-initialises from the seed and trains.
TrainResult train(const Dataset& data, const ResNetArch& arch, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg, std::ostream* log = nullptr,
                  std::uint64_t init_stream = 0);

struct FamilyFailure {
  int component = 0;
  std::string message;
};

struct FamilyResult {
  std::vector<TrainResult> members;  ///< index i-1 holds component i
  std::vector<FamilyFailure> failures;

  [[nodiscard]] std::vector<Surrogate> models() const;
};

/// One reduced network per Lorenz 96 component. `arch_for(input_dim)` gives the
/// architecture for a component with that reduced input width.
FamilyResult train_reduced_family(const Dataset& full,
                                  const std::function<ResNetArch(int input_dim)>& arch_for,
                                  const LossConfig& loss_cfg, const TrainConfig& train_cfg,
                                  int jobs = 1, std::ostream* log = nullptr);

nlohmann::json train_report_to_json(const TrainReport& report);
std::string loss_history_csv(const TrainReport& report);

}  // namespace nudgenet
