#pragma once

#include <utility>

#include "kf/types.hpp"

namespace kf {

/// Frozen linear-quadratic problem z' = A z + B u with stage cost z'Qz + u'Ru.
struct LqProblem {
  Matrix A;  // kappa x kappa
  Matrix B;  // kappa x mu
  Matrix Q;  // kappa x kappa, symmetric PSD
  Matrix R;  // mu x mu, symmetric PD

  Index state_dim() const { return A.rows(); }
  Index control_dim() const { return B.cols(); }
};

/// Throws ShapeMismatch on inconsistent dimensions. With check_definiteness,
/// also throws InvalidParameter when Q is not symmetric PSD or R not symmetric PD.
void validate(const LqProblem& prob, bool check_definiteness = true);

struct RiccatiSolution {
  Matrix Pi;
  Matrix K;
  double residual_norm = 0.0;
  int iterations = 0;
};

enum class DareMethod {
  FixedPoint,  // plain Riccati recursion from Pi = Q
  Doubling,    // structured doubling, then fixed-point polish if needed
};

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  DareMethod method = DareMethod::Doubling;
  bool validate = true;
};

/// Solves Pi = Q + A'Pi A - A'Pi B (R + B'Pi B)^-1 B'Pi A.
///
/// Both methods produce the iterates of the Riccati recursion started at
/// Pi = Q; doubling visits horizons 1, 2, 4, ... and is what makes near-identity
/// A = I + dt G tractable for small dt. If the doubling sequence overflows (an
/// unstable mode invisible to Q), the last finite iterate seeds the fixed-point
/// recursion, so the returned Pi is the same minimal solution either way.
///
/// Throws NonConvergence when the Frobenius residual stays above tol and
/// SingularInnerSolve when R + B'Pi B cannot be factorized.
RiccatiSolution solve_dare(const LqProblem& prob, const DareOptions& opts = {});

/// K = (R + B'Pi B)^-1 B'Pi A; the feedback is u = -K z.
Matrix feedback_gain(const LqProblem& prob, const Matrix& Pi);

/// Frobenius norm of the DARE residual, evaluated directly from the equation.
double dare_residual(const LqProblem& prob, const Matrix& Pi);

/// Closed-form limit of the two-agent constant-kernel problem as dt -> 0.
struct BinaryOracle {
  double pi_d = 0.0;
  double pi_o = 0.0;
  double p = 0.0;
  double gamma = 1.0;

  /// (pi_d pi_o; pi_o pi_d) kron I_d.
  Matrix pi_matrix(int d) const;
};

BinaryOracle analytic_binary_riccati(double p, double gamma);

/// Residual of 2 At Pi - Pi^2 / gamma + I = 0 for the oracle's Pi, with
/// At = (-p p; p -p) kron I_d. Frobenius norm.
double limit_equation_residual(const BinaryOracle& oracle, int d);

/// (u, u*) = -(1/gamma) (pi_d v + pi_o v*, pi_o v + pi_d v*).
std::pair<Vector, Vector> analytic_binary_feedback(const Vector& v, const Vector& v_star,
                                                   const BinaryOracle& oracle);

/// The dt-embedded LQ problem of two first-order agents with constant kernel p:
/// A = I + dt At, B = dt I, Q = dt I, R = dt gamma I, state (v, v*).
LqProblem constant_kernel_binary_problem(double p, double gamma, int d, double dt);

}  // namespace kf
