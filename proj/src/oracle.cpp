#include "kf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kf/error.hpp"
#include "kf/models.hpp"
#include "kf/sdre.hpp"

namespace kf {

RiccatiOracleReport riccati_oracle(const std::vector<double>& p_values, const std::vector<double>& gamma_values,
                                   const std::vector<double>& dt_values, double tol, const DareOptions& opts) {
  std::vector<double> dts = dt_values;
  std::sort(dts.begin(), dts.end(), std::greater<>());
  RiccatiOracleReport rep;
  for (double p : p_values) {
    for (double g : gamma_values) {
      const Matrix limit = analytic_binary_riccati(p, g).pi_matrix(1);
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < dts.size(); ++k) {
        RiccatiOracleCell c{p, g, dts[k], 0.0, 0};
        std::ostringstream tag;
        tag << "p=" << p << " gamma=" << g << " dt=" << dts[k];
        try {
          const RiccatiSolution sol = solve_dare(constant_kernel_binary_problem(p, g, 1, dts[k]), opts);
          c.max_error = (sol.Pi - limit).cwiseAbs().maxCoeff();
          c.iterations = sol.iterations;
        } catch (const Error& e) {
          c.max_error = std::numeric_limits<double>::infinity();
          rep.failures.push_back(tag.str() + ": " + e.what());
        }
        if (k > 0 && !(c.max_error < prev)) rep.failures.push_back(tag.str() + ": error did not decrease");
        if (k + 1 == dts.size() && !(c.max_error <= tol)) rep.failures.push_back(tag.str() + ": error above tolerance");
        prev = c.max_error;
        rep.cells.push_back(c);
      }
    }
  }
  return rep;
}

double lq_cost(const LqProblem& prob, const Vector& z0, const std::vector<Vector>& controls) {
  Vector z = z0;
  double J = 0.0;
  for (const Vector& u : controls) {
    J += z.dot(prob.Q * z) + u.dot(prob.R * u);
    z = prob.A * z + prob.B * u;
  }
  return J;
}

namespace {

// Gradient of lq_cost with respect to the stacked controls.
Vector adjoint_gradient(const LqProblem& prob, const Vector& z0, const Vector& u, int N) {
  const Index m = prob.control_dim();
  std::vector<Vector> z(static_cast<std::size_t>(N) + 1);
  z[0] = z0;
  for (int n = 0; n < N; ++n) z[n + 1] = prob.A * z[n] + prob.B * u.segment(n * m, m);
  Vector g(u.size());
  Vector lambda = Vector::Zero(prob.state_dim());  // dJ/dz_{n+1}
  for (int n = N - 1; n >= 0; --n) {
    g.segment(n * m, m) = 2.0 * prob.R * u.segment(n * m, m) + prob.B.transpose() * lambda;
    lambda = 2.0 * prob.Q * z[n] + prob.A.transpose() * lambda;
  }
  return g;
}

}  // namespace

DirectOcpResult direct_lq_minimize(const LqProblem& prob, const Vector& z0, int N, double rel_tol, int max_iter) {
  validate(prob);
  if (N < 1) throw InvalidParameter("direct_lq_minimize: n_steps must be >= 1");
  if (z0.size() != prob.state_dim()) throw ShapeMismatch("direct_lq_minimize: z0 has the wrong size");
  const Index m = prob.control_dim();
  const Vector zero_state = Vector::Zero(prob.state_dim());
  Vector u = Vector::Zero(N * m);
  Vector r = -adjoint_gradient(prob, z0, u, N);
  Vector d = r;
  const double r0 = r.norm();
  double rr = r.squaredNorm();
  int it = 0;
  while (it < max_iter && std::sqrt(rr) > rel_tol * r0 && r0 > 0.0) {
    const Vector Hd = adjoint_gradient(prob, zero_state, d, N);
    const double alpha = rr / d.dot(Hd);
    u += alpha * d;
    r -= alpha * Hd;
    const double rr_new = r.squaredNorm();
    d = r + (rr_new / rr) * d;
    rr = rr_new;
    ++it;
  }
  DirectOcpResult out;
  out.controls.resize(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) out.controls[n] = u.segment(n * m, m);
  out.cost = lq_cost(prob, z0, out.controls);
  out.iterations = it;
  out.gradient_norm = adjoint_gradient(prob, z0, u, N).norm();
  return out;
}

BruteForceCheck brute_force_check(double p, double gamma, double dt, int n_steps, const Vector& z0,
                                  const DareOptions& opts) {
  const ModelSpec spec = make_constant_kernel(p, gamma, 1);
  const LqProblem prob = constant_kernel_binary_problem(p, gamma, 1, dt);
  TrajectoryOptions topts;
  topts.dare = opts;
  const auto traj = mpc_dsdre_trajectory(spec, z0, dt, n_steps, topts);
  std::vector<Vector> controls;
  for (int n = 0; n < n_steps; ++n) controls.push_back(traj[n].control);

  BruteForceCheck c;
  c.p = p;
  c.gamma = gamma;
  c.dt = dt;
  c.n_steps = n_steps;
  c.dsdre_cost = lq_cost(prob, z0, controls);
  c.direct_cost = direct_lq_minimize(prob, z0, n_steps).cost;
  c.relative_gap = (c.dsdre_cost - c.direct_cost) / c.direct_cost;
  return c;
}

}  // namespace kf
