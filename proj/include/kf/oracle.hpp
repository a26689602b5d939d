#pragma once

#include <string>
#include <vector>

#include "kf/linalg_control.hpp"
#include "kf/types.hpp"

namespace kf {

struct RiccatiOracleCell {
  double p = 0.0;
  double gamma = 0.0;
  double dt = 0.0;
  double max_error = 0.0;  // max |Pi_dt - Pi_limit|
  int iterations = 0;
};

struct RiccatiOracleReport {
  std::vector<RiccatiOracleCell> cells;
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

/// dt-embedded constant-kernel DAREs against the closed-form limit. A (p, gamma)
/// pair passes when the error decreases as dt decreases and is <= tol at the
/// smallest dt.
RiccatiOracleReport riccati_oracle(const std::vector<double>& p_values, const std::vector<double>& gamma_values,
                                   const std::vector<double>& dt_values, double tol, const DareOptions& opts = {});

/// sum_{n < N} z_n'Q z_n + u_n'R u_n along z_{n+1} = A z_n + B u_n.
double lq_cost(const LqProblem& prob, const Vector& z0, const std::vector<Vector>& controls);

struct DirectOcpResult {
  std::vector<Vector> controls;
  double cost = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Minimizes lq_cost over the whole control sequence by conjugate gradients
/// on the stacked controls, gradients by the adjoint recursion.
DirectOcpResult direct_lq_minimize(const LqProblem& prob, const Vector& z0, int n_steps, double rel_tol = 1e-12,
                                   int max_iter = 100000);

struct BruteForceCheck {
  double p = 0.0;
  double gamma = 0.0;
  double dt = 0.0;
  int n_steps = 0;
  double dsdre_cost = 0.0;
  double direct_cost = 0.0;
  double relative_gap = 0.0;  // (dsdre - direct) / direct
};

/// Closed-loop DSDRE rollout of the one-dimensional constant-kernel pair from
/// z0 against the direct finite-horizon minimum with the same cost.
BruteForceCheck brute_force_check(double p, double gamma, double dt, int n_steps, const Vector& z0,
                                  const DareOptions& opts = {});

}  // namespace kf
