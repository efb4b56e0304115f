#pragma once

#include "nudgenet/dynamics.hpp"
#include "nudgenet/integrator.hpp"
#include "nudgenet/nudging.hpp"
#include "nudgenet/rng.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nudgenet {

/// Reference ensemble recipe: N_s initial conditions drawn i.i.d. normal,
/// spun up, then recorded at `record_stride` for `horizon` time units.
/// Recorded times are relative to the end of spin-up.
struct EnsembleSpec {
  int n_refs = 1000;
  double init_mean = 0.0;
  double init_std = 10.0;
  std::uint64_t seed = 0;
  double spin_up = 100.0;
  double horizon = 10.0;
  double record_stride = 0.1;
  StreamPurpose purpose = StreamPurpose::train_initial;

  void validate() const;
};

struct MemberFailure {
  std::size_t member = 0;
  double last_good_time = 0.0;
  std::string message;
};

struct Ensemble {
  std::vector<Trajectory> refs;
  std::vector<std::size_t> member_ids;  ///< parallel to refs
  std::vector<MemberFailure> failures;
};

/// Initial condition of one member; depends only on (spec, member).
State ensemble_initial_condition(const EnsembleSpec& spec, int dim, std::size_t member);

Ensemble generate_ensemble(const EnsembleSpec& spec, const SystemSpec& system,
                           const IntegratorConfig& integ, int jobs = 1);

/// One input/output pair: ([w(t_k); I_M u(t_k)], w(t_{k+1})).
struct TrainingSample {
  Eigen::VectorXd input;
  Eigen::VectorXd output;
  int ref_id = 0;
  int window = 0;
};

struct DatasetMeta {
  SystemSpec system;
  double mu = 0.0;
  double delta = 0.0;
  std::string innovation = "frozen_state";
  std::vector<int> observed_indices;
  int state_dim = 0;
  int windows = 0;  ///< N, windows per reference
  int n_refs = 0;   ///< N_s
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string ensemble_hash;
  std::string sample_source = "first N windows of each reference";
};

struct Dataset {
  std::vector<TrainingSample> samples;
  DatasetMeta meta;

  [[nodiscard]] int input_dim() const;
  [[nodiscard]] int output_dim() const;
  /// Checks sample shapes, sample count and the window chain.
  void validate() const;
};

/// Raised when more than 0.1% of the windows fail to integrate.
class DatasetInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Offline training-data preparation: for each reference, nudge through
/// the first `window_count` windows from w0 and record every window as a sample.
/// Samples are ordered by (ref_id, window) regardless of `jobs`.
Dataset build_dataset(const std::vector<Trajectory>& refs, const SystemSpec& system,
                      const NudgingConfig& nudge, int window_count, const IntegratorConfig& integ,
                      int jobs = 1, std::vector<std::string>* dropped_log = nullptr);

/// Cyclic stencil {i-2, i-1, i, i+1} of component i (1-based) in dimension d.
std::array<int, 4> stencil_indices(int component, int dim);

/// Restricts a full Lorenz 96 sample to component `component` (1-based):
/// input = [w on the stencil; observations whose index lies in the stencil],
/// output = w_component(t_{k+1}).
TrainingSample reduce_sample(const TrainingSample& sample, int component,
                             const ObservationOperator& op, SystemKind kind);

/// Number of observation slots that fall inside the stencil of `component`.
int reduced_input_dim(int component, const ObservationOperator& op);

/// Reduced training set for one component.
Dataset reduce_dataset(const Dataset& full, int component);

/// Binary dataset file: magic "NGDSET01", u64 JSON length, JSON metadata,
/// u64 sample count, u64 input dim, u64 output dim, then row-major rows of
/// (ref_id, window, input..., output...) as little-endian float64.
std::string serialize_dataset(const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);
/// Hash of the serialised dataset (identical to hashing the saved file).
std::string dataset_hash(const Dataset& data);
/// Rows as CSV: ref_id,window,in1..,out1..
std::string dataset_to_csv(const Dataset& data);

}  // namespace nudgenet
