#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kf/diagnostics.hpp"
#include "kf/linalg_control.hpp"
#include "kf/models.hpp"
#include "kf/neural.hpp"
#include "kf/rng.hpp"
#include "kf/types.hpp"

namespace kf {

/// N agents. First-order models keep their state in `positions` and leave
/// `velocities` with zero columns.
struct ParticleEnsemble {
  RowMatrix positions;
  RowMatrix velocities;
  double time = 0.0;
  long step_index = 0;
  std::uint64_t seed = 0;

  Index size() const { return positions.rows(); }
  bool second_order() const { return velocities.cols() > 0; }
  /// The coordinates the controller acts on: velocities, or the state itself.
  const RowMatrix& controlled() const { return second_order() ? velocities : positions; }
};

struct InitialDistribution {
  enum class Kind { Uniform, Gaussian, Mixture, PointMass };
  Kind kind = Kind::Uniform;
  Vector lo, hi;        // Uniform box; optional truncation box for Gaussian/Mixture
  Vector mean;          // Gaussian centre, PointMass location
  double sigma = 1.0;   // Gaussian standard deviation (isotropic)
  // Mixture: every coordinate independently from sum_k w_k N(m_k, s_k^2).
  std::vector<double> weights, means, sigmas;

  int dim() const;
};

void validate(const InitialDistribution& dist);
std::string to_string(InitialDistribution::Kind k);
InitialDistribution::Kind distribution_kind_from_string(std::string_view name);

/// Uniform on the model sampling box.
InitialDistribution uniform_box(const ModelSpec& spec);
/// 0.5 N(-0.3, 0.1^2) + 0.5 N(0.3, 0.1^2) per coordinate, truncated to the model box.
InitialDistribution default_bimodal(const ModelSpec& spec);

/// n i.i.d. agents; particle i uses its own substream, so the result is a
/// pure function of (dist, n, seed). Truncated laws use rejection.
ParticleEnsemble sample_initial(const InitialDistribution& dist, const ModelSpec& spec, Index n, std::uint64_t seed);

/// floor(n/2) disjoint pairs from a uniformly random permutation, paired
/// adjacently. With n odd the last permuted index is left out.
std::vector<std::pair<Index, Index>> pair_particles(Index n, CounterRng& rng);

// --- controllers ---------------------------------------------------------

/// Outcome of a batch of binary interactions: controlled post-interaction
/// pair states (full stacked layout, strength eps) and the controls used.
struct PairUpdate {
  RowMatrix post;      // n x kappa
  RowMatrix controls;  // n x mu
};

/// Maps a batch of stacked pair states to their controlled binary update.
/// Failures on row r raise ControllerFailure(r, -1).
class Controller {
 public:
  virtual ~Controller() = default;
  virtual PairUpdate apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S, double eps) const = 0;
  virtual std::string name() const = 0;
};

class ZeroController final : public Controller {
 public:
  PairUpdate apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S, double eps) const override;
  std::string name() const override { return "zero"; }
};

/// One DARE per pair, data-parallel over the batch.
class ExactDsdreController final : public Controller {
 public:
  explicit ExactDsdreController(DareOptions opts = {}) : opts_(opts) {}
  PairUpdate apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S, double eps) const override;
  std::string name() const override { return "exact_dsdre"; }

 private:
  DareOptions opts_;
};

/// Network u_theta(s, eps); the update is the binary step with that control.
class NnControlController final : public Controller {
 public:
  explicit NnControlController(NetworkParams params);
  PairUpdate apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S, double eps) const override;
  std::string name() const override { return "nn_control"; }

 private:
  NetworkParams params_;
};

/// Network s'_theta(s, eps) predicting the controlled block (post velocities,
/// or the post state of first-order models). Positions follow the uncontrolled
/// binary step; the reported control is (post - step(s, 0)) / eps on that block.
class NnStateUpdateController final : public Controller {
 public:
  explicit NnStateUpdateController(NetworkParams params);
  PairUpdate apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S, double eps) const override;
  std::string name() const override { return "nn_state_update"; }

 private:
  NetworkParams params_;
};

enum class ControllerKind { ExactDsdre, NnControl, NnStateUpdate, Zero };
std::string to_string(ControllerKind k);
ControllerKind controller_kind_from_string(std::string_view name);

/// Checks that a surrogate fits spec: input kappa + 1, output mu.
void check_surrogate_shape(const ModelSpec& spec, const NetworkParams& params);

// --- engine --------------------------------------------------------------

enum class Scheme { SplitTransportInteraction, NanbuSimultaneous };
std::string to_string(Scheme s);
Scheme scheme_from_string(std::string_view name);

struct KineticConfig {
  ModelSpec model;
  ControllerKind controller = ControllerKind::ExactDsdre;
  std::string model_file;  // NN controllers
  Index n_particles = 10000;
  double dt = 0.05;
  double epsilon = 0.05;
  int n_steps = 100;
  Scheme scheme = Scheme::SplitTransportInteraction;
  std::uint64_t seed = 1;
  int snapshot_every = 10;
  InitialDistribution initial;
  DareOptions dare;
};

void validate(const KineticConfig& cfg);
std::unique_ptr<Controller> make_controller(const KineticConfig& cfg);

/// Per-step cost sums over the interacting pairs, with the unscaled
/// (dt = 1) Q and R of the model.
struct CostRecord {
  long step = 0;
  double time = 0.0;  // time at the start of the step
  double dt = 0.0;
  Index n_particles = 0;
  Index n_interacting_pairs = 0;
  double state_cost = 0.0;    // sum s'Q s
  double control_cost = 0.0;  // sum u'R u
};

/// One step: random pairing, interaction with probability dt/epsilon and
/// strength epsilon, then transport by dt (second-order models).
ParticleEnsemble mc_step(const ParticleEnsemble& ens, const KineticConfig& cfg, const Controller& controller,
                         CostRecord* cost = nullptr);

struct SimulationResult {
  std::vector<DensitySnapshot> snapshots;
  std::vector<ParticleEnsemble> states;  // raw ensemble for every snapshot
  std::vector<CostRecord> costs;
  ParticleEnsemble final_state;
  double seconds_interaction = 0.0;
  double seconds_total = 0.0;
};

/// Samples the initial ensemble, runs n_steps of mc_step, snapshots at steps
/// 0, snapshot_every, 2 snapshot_every, ... and the final step.
SimulationResult simulate(const KineticConfig& cfg, const Controller& controller);
SimulationResult simulate(const KineticConfig& cfg);
SimulationResult simulate_from(const ParticleEnsemble& initial, const KineticConfig& cfg, const Controller& controller);

/// `t, particle_id, x_1..x_d, v_1..v_d`.
void write_snapshot_csv(const std::filesystem::path& path, const ParticleEnsemble& ens);

}  // namespace kf
