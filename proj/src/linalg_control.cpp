#include "kf/linalg_control.hpp"

#include <cmath>
#include <sstream>

#include "kf/error.hpp"

namespace kf {
namespace {

void symmetrize(Matrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

// Solves S X = rhs for the SPD-in-exact-arithmetic matrix S = R + B'Pi B.
// Cholesky first; pivoted LU when round-off breaks definiteness.
Matrix inner_solve(const Matrix& S, const Matrix& rhs) {
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() == Eigen::Success) {
    return llt.solve(rhs);
  }
  Eigen::PartialPivLU<Matrix> lu(S);
  const double rc = lu.rcond();
  if (!(rc > 1e-14)) {
    std::ostringstream os;
    os << "R + B'Pi B is numerically singular (rcond = " << rc << ")";
    throw SingularInnerSolve(os.str());
  }
  return lu.solve(rhs);
}

// One step of the Riccati recursion.
Matrix riccati_map(const LqProblem& prob, const Matrix& Pi) {
  const Matrix PiA = Pi * prob.A;
  const Matrix BtPiA = prob.B.transpose() * PiA;
  Matrix S = prob.R + prob.B.transpose() * Pi * prob.B;
  symmetrize(S);
  Matrix next = prob.Q + prob.A.transpose() * PiA - BtPiA.transpose() * inner_solve(S, BtPiA);
  symmetrize(next);
  return next;
}

bool is_symmetric(const Matrix& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

void validate(const LqProblem& prob, bool check_definiteness) {
  const Index n = prob.A.rows();
  const Index m = prob.B.cols();
  if (prob.A.cols() != n || prob.B.rows() != n || prob.Q.rows() != n || prob.Q.cols() != n ||
      prob.R.rows() != m || prob.R.cols() != m) {
    std::ostringstream os;
    os << "inconsistent LQ dimensions: A " << prob.A.rows() << "x" << prob.A.cols() << ", B "
       << prob.B.rows() << "x" << prob.B.cols() << ", Q " << prob.Q.rows() << "x" << prob.Q.cols()
       << ", R " << prob.R.rows() << "x" << prob.R.cols();
    throw ShapeMismatch(os.str());
  }
  if (!check_definiteness) return;
  if (!is_symmetric(prob.Q) || !is_symmetric(prob.R)) {
    throw InvalidParameter("Q and R must be symmetric");
  }
  const double qmin = Eigen::SelfAdjointEigenSolver<Matrix>(prob.Q, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff();
  if (n > 0 && qmin < -1e-12 * std::max(1.0, prob.Q.norm())) {
    throw InvalidParameter("Q must be positive semidefinite");
  }
  const double rmin = Eigen::SelfAdjointEigenSolver<Matrix>(prob.R, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff();
  if (m > 0 && !(rmin > 0.0)) {
    throw InvalidParameter("R must be positive definite");
  }
}

Matrix feedback_gain(const LqProblem& prob, const Matrix& Pi) {
  Matrix S = prob.R + prob.B.transpose() * Pi * prob.B;
  symmetrize(S);
  return inner_solve(S, prob.B.transpose() * Pi * prob.A);
}

double dare_residual(const LqProblem& prob, const Matrix& Pi) {
  return (riccati_map(prob, Pi) - Pi).norm();
}

RiccatiSolution solve_dare(const LqProblem& prob, const DareOptions& opts) {
  validate(prob, opts.validate);
  const Index n = prob.state_dim();

  RiccatiSolution sol;
  Matrix Pi = prob.Q;
  int iterations = 0;

  if (opts.method == DareMethod::Doubling) {
    // A_k, G_k, H_k with H_k the Riccati iterate at horizon 2^k.
    Matrix Ak = prob.A;
    Matrix Gk = prob.B * inner_solve(prob.R, prob.B.transpose());
    symmetrize(Gk);
    Matrix Hk = prob.Q;
    const Matrix I = Matrix::Identity(n, n);
    constexpr int kMaxDoublings = 80;
    for (int k = 0; k < kMaxDoublings && iterations < opts.max_iter; ++k) {
      Eigen::PartialPivLU<Matrix> lu(I + Gk * Hk);
      const Matrix V1 = lu.solve(Ak);
      const Matrix V2 = lu.solve(Gk);
      Matrix An = Ak * V1;
      Matrix Gn = Gk + Ak * V2 * Ak.transpose();
      Matrix Hn = Hk + Ak.transpose() * Hk * V1;
      symmetrize(Gn);
      symmetrize(Hn);
      if (!An.allFinite() || !Gn.allFinite() || !Hn.allFinite() || An.norm() > 1e150 ||
          Gn.norm() > 1e150) {
        break;
      }
      ++iterations;
      const double change = (Hn - Hk).norm();
      Ak = std::move(An);
      Gk = std::move(Gn);
      Hk = std::move(Hn);
      if (change <= 1e-15 * std::max(1.0, Hk.norm())) break;
    }
    Pi = Hk;
  }

  // Fixed-point recursion: the whole solve for FixedPoint, a polish otherwise.
  Matrix next = riccati_map(prob, Pi);
  double residual = (next - Pi).norm();
  while (residual > opts.tol && iterations < opts.max_iter) {
    Pi = std::move(next);
    ++iterations;
    next = riccati_map(prob, Pi);
    residual = (next - Pi).norm();
    if (!std::isfinite(residual)) break;
  }
  if (!(residual <= opts.tol)) {
    std::ostringstream os;
    os << "DARE did not converge: residual " << residual << " after " << iterations
       << " iterations (tol " << opts.tol << ")";
    throw NonConvergence(iterations, residual, os.str());
  }

  sol.Pi = std::move(Pi);
  sol.residual_norm = residual;
  sol.iterations = iterations;
  sol.K = feedback_gain(prob, sol.Pi);
  return sol;
}

Matrix BinaryOracle::pi_matrix(int d) const {
  Matrix P(2 * d, 2 * d);
  const Matrix I = Matrix::Identity(d, d);
  P << pi_d * I, pi_o * I, pi_o * I, pi_d * I;
  return P;
}

BinaryOracle analytic_binary_riccati(double p, double gamma) {
  if (!(gamma > 0.0)) {
    throw InvalidParameter("analytic_binary_riccati: gamma must be positive");
  }
  const double sg = std::sqrt(gamma);
  BinaryOracle o;
  o.p = p;
  o.gamma = gamma;
  o.pi_d = 0.5 * sg * (1.0 - 2.0 * sg * p + std::sqrt(1.0 + 4.0 * gamma * p * p));
  o.pi_o = sg - o.pi_d;
  return o;
}

double limit_equation_residual(const BinaryOracle& oracle, int d) {
  const Matrix I = Matrix::Identity(d, d);
  Matrix At(2 * d, 2 * d);
  At << -oracle.p * I, oracle.p * I, oracle.p * I, -oracle.p * I;
  const Matrix Pi = oracle.pi_matrix(d);
  const Matrix res = 2.0 * At * Pi - Pi * Pi / oracle.gamma + Matrix::Identity(2 * d, 2 * d);
  return res.norm();
}

std::pair<Vector, Vector> analytic_binary_feedback(const Vector& v, const Vector& v_star,
                                                   const BinaryOracle& oracle) {
  if (v.size() != v_star.size()) {
    throw ShapeMismatch("analytic_binary_feedback: v and v* differ in dimension");
  }
  const double s = -1.0 / oracle.gamma;
  Vector u = s * (oracle.pi_d * v + oracle.pi_o * v_star);
  Vector u_star = s * (oracle.pi_o * v + oracle.pi_d * v_star);
  return {std::move(u), std::move(u_star)};
}

LqProblem constant_kernel_binary_problem(double p, double gamma, int d, double dt) {
  const Index n = 2 * d;
  const Matrix I = Matrix::Identity(d, d);
  Matrix At(n, n);
  At << -p * I, p * I, p * I, -p * I;
  LqProblem prob;
  prob.A = Matrix::Identity(n, n) + dt * At;
  prob.B = dt * Matrix::Identity(n, n);
  prob.Q = dt * Matrix::Identity(n, n);
  prob.R = dt * gamma * Matrix::Identity(n, n);
  return prob;
}

}  // namespace kf
