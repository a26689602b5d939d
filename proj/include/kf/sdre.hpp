#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kf/linalg_control.hpp"
#include "kf/models.hpp"
#include "kf/types.hpp"

namespace kf {

/// Two interacting agents plus the interaction time-step. First-order models
/// use x and x_star only.
struct PairState {
  Vector x;
  Vector x_star;
  Vector v;
  Vector v_star;
  double dt = 0.0;

  /// (x, x*) or (x, x*, v, v*).
  Vector stacked() const;
  static PairState from_stacked(const ModelSpec& spec, const Eigen::Ref<const Vector>& s, double dt);
};

/// u = -K(s) s for the DARE frozen at s with time-step dt.
Vector dsdre_control(const ModelSpec& spec, const Eigen::Ref<const Vector>& s, double dt,
                     const DareOptions& opts = {});
Vector dsdre_control(const ModelSpec& spec, const PairState& s, const DareOptions& opts = {});

/// How a frozen step advances the pair.
enum class UpdateRule {
  Discrete,          // s' = A s + B u
  LiteralAlgorithm,  // s' = s + dt (A s + B u), kept for comparison only
};

struct TrajectoryStep {
  Vector state;    // state at step n
  Vector control;  // control applied at step n
};

struct TrajectoryOptions {
  UpdateRule rule = UpdateRule::Discrete;
  bool zero_control = false;
  DareOptions dare;
};

/// Receding-horizon rollout: freeze, solve, apply, repeat. Returns n_steps + 1
/// entries; the last carries the final state and an empty control.
/// Solver errors are rethrown with the step index prepended to the message.
std::vector<TrajectoryStep> mpc_dsdre_trajectory(const ModelSpec& spec, const Eigen::Ref<const Vector>& s0,
                                                 double dt, int n_steps, const TrajectoryOptions& opts = {});

struct DataRecord {
  Vector state;
  double dt = 0.0;
  Vector control;
  Vector next_state;
};

struct DatasetConfig {
  std::size_t n_samples = 100000;
  double dt_lo = 0.001;
  double dt_hi = 1.0;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  UpdateRule rule = UpdateRule::Discrete;
  DareOptions dare;
  int max_attempts_per_sample = 100;
};

struct Dataset {
  ModelSpec spec;
  DatasetConfig config;
  std::vector<DataRecord> records;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::size_t failures = 0;
};

/// i.i.d. uniform (s, dt) samples from the model box, each labelled with its
/// DSDRE control and controlled post-interaction state. Sample i draws from
/// its own substream (seed, i, attempt), so the result does not depend on
/// evaluation order. Failed solves are resampled; more than 1% failures
/// raises DatasetGenerationStalled.
Dataset generate_dataset(const ModelSpec& spec, const DatasetConfig& cfg);

// --- dataset files -------------------------------------------------------

/// Header `s_1..s_k,dt,u_1..u_m,sp_1..sp_k`; shortest round-trip decimals.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Sidecar JSON: model spec, config, seed, split indices, failure count and a
/// generation timestamp (SOURCE_DATE_EPOCH when set, for reproducible output).
void write_dataset_metadata(const std::filesystem::path& path, const Dataset& data);

/// Columns of a dataset CSV: inputs (s, dt) and the two target blocks.
struct DatasetTable {
  int kappa = 0;
  int mu = 0;
  RowMatrix inputs;       // n x (kappa + 1)
  RowMatrix controls;     // n x mu
  RowMatrix next_states;  // n x kappa
};

DatasetTable read_dataset_csv(const std::filesystem::path& path);
DatasetTable to_table(const Dataset& data);

/// Split indices stored in a metadata sidecar.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};
DatasetSplit read_dataset_split(const std::filesystem::path& metadata_path);

std::string format_double(double x);

}  // namespace kf
