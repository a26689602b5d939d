#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kf/models.hpp"
#include "kf/types.hpp"

namespace kf {

struct ParticleEnsemble;
struct CostRecord;

struct Histogram {
  std::vector<double> edges;  // bins + 1 increasing edges
  std::vector<long> counts;
  long total() const;
};

/// Equal-width bins on [lo, hi]; values outside are clamped into the end bins.
Histogram histogram(const std::vector<double>& x, double lo, double hi, int bins);
/// Freedman-Diaconis bin width 2 IQR n^(-1/3) over the sample range.
Histogram histogram_fd(const std::vector<double>& x);

struct DensitySnapshot {
  double time = 0.0;
  long step = 0;
  Index n = 0;
  std::map<std::string, Histogram> histograms;
  Vector velocity_mean;  // controlled coordinates
  Matrix velocity_cov;
  double consensus = 0.0;
  std::string raw_ref;
};

/// Histograms of |v| (or x_1 for first-order models) and x_1, moments and consensus.
DensitySnapshot make_snapshot(const ParticleEnsemble& ens, const ModelSpec& spec);

/// Mean of |v_i - vbar|^2 over the controlled coordinates, vbar the global
/// mean for PairMean targets and 0 for Zero targets.
double consensus_metric(const ParticleEnsemble& ens, Target target);

double stage_cost(const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& u, const Matrix& Q,
                  const Matrix& R);

/// Pairs taking part in one step, for running_cost.
struct StepPairs {
  double dt = 0.0;
  Index n_particles = 0;
  RowMatrix states;    // one pair state per row
  RowMatrix controls;  // one pair control per row
};

/// sum over steps of dt / N * sum over pairs (s'Qs + u'Ru).
double running_cost(const std::vector<StepPairs>& steps, const Matrix& Q, const Matrix& R);
double running_cost(const std::vector<CostRecord>& records);

// --- Wasserstein-1 on the line -----------------------------------------

/// Samples: empirical measures with equal weights.
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);
/// Sample set against a piecewise-linear density on nodes (normalized by its
/// trapezoidal mass); the CDF difference is integrated exactly.
double wasserstein1_1d(std::vector<double> samples, const Vector& nodes, const Vector& density);
/// Two piecewise-linear densities.
double wasserstein1_1d(const Vector& nodes_a, const Vector& density_a, const Vector& nodes_b,
                       const Vector& density_b);

// --- benchmark -----------------------------------------------------------

struct BenchCell {
  std::string controller;
  int d = 0;
  Index n_particles = 0;
  int n_steps = 0;
  double median_seconds = 0.0;  // whole simulation
  double per_step_seconds = 0.0;
  int repetitions = 0;
  bool censored = false;
  double speedup_vs_exact = 0.0;  // per-step exact / per-step this; 0 when unknown
};

struct BenchConfig {
  ModelSpec base;                        // d is overridden per cell
  std::vector<Index> batch_sizes{100, 1000, 10000};
  std::vector<int> d_values{15};
  std::vector<std::string> controllers{"zero", "nn_control", "nn_state_update", "exact_dsdre"};
  std::string control_preset = "test2-u-fnn";
  std::string state_preset = "test2-s-fnn";
  std::string control_model_file;        // optional trained models, used when d matches
  std::string state_model_file;
  int n_steps = 100;
  int exact_steps = 10;
  int repetitions = 5;
  int exact_repetitions = 1;
  bool warm_up = true;
  double time_budget_seconds = 600.0;    // per cell; longer cells are censored
  double dt = 0.05;
  std::uint64_t seed = 1;
};

/// Monotonic wall clock, median over repetitions after a discarded warm-up.
/// A cell whose first timed run exceeds the budget is reported censored, and
/// larger N for the same controller and d are skipped as censored.
std::vector<BenchCell> bench_controllers(const BenchConfig& cfg);
void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchCell>& cells);

}  // namespace kf
