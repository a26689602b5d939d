#pragma once

#include <string>
#include <string_view>

#include "kf/types.hpp"

namespace kf {

enum class ModelKind {
  Sznajd,          // first order, d = 1, P(x, x*) = beta (1 - x^2)
  CuckerSmale,     // second order, P = 1 / (1 + |x - x*|^2)
  QuasiMorse,      // second order, attraction-repulsion + self-propulsion
  ConstantKernel,  // first order, P = kernel; the closed-form Riccati oracle case
};

enum class Order { First, Second };

enum class Target {
  Zero,      // steer the controlled coordinates to 0
  PairMean,  // steer both agents to their common mean
};

struct ModelParams {
  double beta = -1.0;  // Sznajd beta, or the quasi-Morse propulsion beta
  double C = 0.6;
  double p = 1.5;
  double l = 0.5;
  double alpha = 2.0;
  double kernel = 1.0;  // ConstantKernel value
};

/// An interaction model. domain_lo/domain_hi bound one agent's state
/// (d entries for first-order models, positions then velocities for second-order).
struct ModelSpec {
  ModelKind kind = ModelKind::CuckerSmale;
  int d = 1;
  Order order = Order::Second;
  ModelParams params;
  double gamma = 0.01;
  Vector domain_lo;
  Vector domain_hi;
  Target target = Target::PairMean;

  /// Per-agent state dimension (d or 2d).
  int agent_dim() const { return order == Order::First ? d : 2 * d; }
  /// kappa: stacked pair state (x, x*) or (x, x*, v, v*).
  int state_dim() const { return 2 * agent_dim(); }
  /// mu = 2d.
  int control_dim() const { return 2 * d; }
  /// Offset of the controlled block (v, v*) inside the pair state.
  int controlled_offset() const { return order == Order::First ? 0 : 2 * d; }
};

/// Throws InvalidParameter on violated ModelSpec invariants.
void validate(const ModelSpec& spec);

ModelSpec make_sznajd(double beta = -1.0, double gamma = 0.05);
ModelSpec make_cucker_smale(int d = 15, double gamma = 0.01);
ModelSpec make_quasi_morse(double gamma = 0.01);
ModelSpec make_constant_kernel(double kernel, double gamma, int d = 1);

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);
std::string to_string(Target target);
Target target_from_string(std::string_view name);

double kernel_sznajd(double x, double beta);
double kernel_cucker_smale(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x_star);

struct MorseTerms {
  double P_x = 0.0;
  double P_v = 0.0;
  bool degenerate_separation = false;  // |x - x*| < 1e-12, P_x reported as 0
};

MorseTerms morse_terms(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x_star,
                       const Eigen::Ref<const Vector>& v, const ModelSpec& spec);

/// Quasi-Morse pair potential W(r) = V(r) - C V(r / l), V(r) = -exp(-r^p / p).
double morse_potential(double r, const ModelParams& params);

/// Frozen factorization s' = A s + B u with A = I + dt G(s), B = dt H(s).
struct SemilinearPair {
  Matrix A;
  Matrix B;
  double dt = 0.0;
};

SemilinearPair semilinearize(const ModelSpec& spec, const Eigen::Ref<const Vector>& s, double dt);

struct CostMatrices {
  Matrix Q;
  Matrix R;
};

/// Stage-cost operators, multiplied by dt (pass dt = 1 for the unscaled pair).
CostMatrices cost_matrices(const ModelSpec& spec, double dt);

/// Explicit binary update of the pair state: one forward-Euler step of the
/// two-agent dynamics with strength dt. Equals A s + B u of semilinearize.
Vector binary_step(const ModelSpec& spec, const Eigen::Ref<const Vector>& s,
                   const Eigen::Ref<const Vector>& u, double dt);

/// Exchanges the two agents in a stacked pair state.
Vector swap_agents(const ModelSpec& spec, const Eigen::Ref<const Vector>& s);
/// Exchanges (u, u*).
Vector swap_controls(const ModelSpec& spec, const Eigen::Ref<const Vector>& u);

}  // namespace kf
