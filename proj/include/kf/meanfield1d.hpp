#pragma once

#include <filesystem>
#include <vector>

#include "kf/kinetic.hpp"
#include "kf/models.hpp"
#include "kf/types.hpp"

namespace kf {

/// Density on a uniform grid. values >= 0, trapezoidal mass 1.
struct GridDensity {
  Vector nodes;
  Vector values;
  double time = 0.0;
};

/// M nodes spanning [lo, hi] inclusive.
Vector uniform_nodes(double lo, double hi, int M);
/// M nodes lo, lo + h, ..., hi - h for a periodic grid of period hi - lo.
Vector periodic_nodes(double lo, double hi, int M);
Vector trapezoid_weights(const Vector& nodes);
double mass(const GridDensity& f);
void normalize(GridDensity& f);

/// Density of a one-dimensional InitialDistribution on the nodes (truncated
/// laws renormalized on the box; a point mass becomes a one-cell spike).
GridDensity initial_density(const InitialDistribution& dist, const Vector& nodes);

/// T(i, j) = u(x_i, x_j): first control component of the binary problem for
/// the pair (x_i, x_j), evaluated in one batch with interaction strength dt.
Matrix tabulate_binary_control(const Controller& controller, const ModelSpec& spec, const Vector& nodes, double dt);
/// u(x_i) = sum_j w_j T(i, j) f(x_j).
Vector reconstruct_mf_control(const Matrix& table, const GridDensity& f);
Vector reconstruct_mf_control(const Controller& controller, const ModelSpec& spec, const GridDensity& f, double dt);

/// P[f](x_i) = sum_j w_j P(x_i, x_j) (x_j - x_i) f(x_j) for the first-order
/// one-dimensional kernels (Sznajd, constant).
Vector interaction_field(const ModelSpec& spec, const GridDensity& f);

enum class Boundary { Clamp, Periodic };

/// Semi-Lagrangian step of f_t + (a f)_x = 0: feet x_i - dt a(x_i), linear
/// interpolation, the factor 1 - dt a'(x_i) (clamped at 0), renormalization.
GridDensity mf_step(const GridDensity& f, const Vector& velocity, double dt, Boundary boundary = Boundary::Clamp);

struct MeanFieldConfig {
  ModelSpec model;  // first order, d = 1
  int M = 400;
  double dt = 0.01;
  int n_steps = 100;
  InitialDistribution f0;  // defaults to default_bimodal(model) when empty
  Boundary boundary = Boundary::Clamp;
};

void validate(const MeanFieldConfig& cfg);

struct MeanFieldResult {
  std::vector<GridDensity> densities;  // n_steps + 1
  std::vector<Vector> controls;        // control field at each stored time
  double cost = 0.0;
};

/// Control table computed once on the grid; each step reconstructs u from the
/// current density, adds P[f] and advances.
MeanFieldResult mf_simulate(const MeanFieldConfig& cfg, const Controller& controller);

/// Time-trapezoid of integral (x^2 + gamma u^2) f dx.
double mf_cost(const std::vector<GridDensity>& densities, const std::vector<Vector>& controls, double gamma);

/// `t, x, f` and `t, x, u` tables for every stored time.
void write_density_csv(const std::filesystem::path& path, const std::vector<GridDensity>& densities);
void write_control_csv(const std::filesystem::path& path, const std::vector<GridDensity>& densities,
                       const std::vector<Vector>& controls);

}  // namespace kf
