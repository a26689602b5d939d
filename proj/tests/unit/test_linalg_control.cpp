#include <doctest.h>

#include <cmath>
#include <random>

#include "kf/error.hpp"
#include "kf/linalg_control.hpp"

using namespace kf;

namespace {

LqProblem scalar(double a, double b, double q, double r) {
  LqProblem p;
  p.A = Matrix::Constant(1, 1, a);
  p.B = Matrix::Constant(1, 1, b);
  p.Q = Matrix::Constant(1, 1, q);
  p.R = Matrix::Constant(1, 1, r);
  return p;
}

// Positive root of b^2 x^2 + (r - a^2 r - q b^2) x - q r = 0, the scalar DARE.
double scalar_dare_root(double a, double b, double q, double r) {
  const double A2 = b * b, B1 = r - a * a * r - q * b * b, C0 = -q * r;
  return (-B1 + std::sqrt(B1 * B1 - 4.0 * A2 * C0)) / (2.0 * A2);
}

LqProblem random_problem(int n, int m, std::mt19937_64& g) {
  std::normal_distribution<double> N;
  LqProblem p;
  p.A = Matrix::NullaryExpr(n, n, [&] { return 0.4 * N(g); });
  p.B = Matrix::NullaryExpr(n, m, [&] { return N(g); });
  const Matrix L = Matrix::NullaryExpr(n, n, [&] { return N(g); });
  p.Q = L * L.transpose() + 0.1 * Matrix::Identity(n, n);
  const Matrix S = Matrix::NullaryExpr(m, m, [&] { return N(g); });
  p.R = S * S.transpose() + Matrix::Identity(m, m);
  return p;
}

}  // namespace

TEST_SUITE("linalg_control") {
  TEST_CASE("golden ratio scalar DARE") {
    for (DareMethod method : {DareMethod::Doubling, DareMethod::FixedPoint}) {
      DareOptions o;
      o.method = method;
      const RiccatiSolution s = solve_dare(scalar(1, 1, 1, 1), o);
      CHECK(s.Pi(0, 0) == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-10));
      CHECK(s.K(0, 0) == doctest::Approx(0.6180340).epsilon(1e-7));
      CHECK(s.residual_norm <= 1e-10);
    }
  }

  TEST_CASE("A = 0 gives Pi = Q and K = 0") {
    std::mt19937_64 g(3);
    LqProblem p = random_problem(3, 2, g);
    p.A.setZero();
    const RiccatiSolution s = solve_dare(p);
    CHECK((s.Pi - p.Q).norm() <= 1e-12);
    CHECK(s.K.norm() <= 1e-12);
  }

  TEST_CASE("uncontrolled stable scalar is the Lyapunov sum") {
    for (DareMethod method : {DareMethod::Doubling, DareMethod::FixedPoint}) {
      DareOptions o;
      o.method = method;
      const RiccatiSolution s = solve_dare(scalar(0.5, 0, 1, 1), o);
      CHECK(s.Pi(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
      CHECK(s.K(0, 0) == 0.0);
    }
  }

  TEST_CASE("scalar DARE matches the quadratic root") {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> U(0.1, 2.0);
    for (int k = 0; k < 50; ++k) {
      const double a = U(g), b = U(g), q = U(g), r = U(g);
      const RiccatiSolution s = solve_dare(scalar(a, b, q, r));
      CHECK(s.Pi(0, 0) == doctest::Approx(scalar_dare_root(a, b, q, r)).epsilon(1e-9));
    }
  }

  TEST_CASE("solution invariants on random problems") {
    std::mt19937_64 g(5);
    for (int k = 0; k < 20; ++k) {
      const LqProblem p = random_problem(4, 2, g);
      const RiccatiSolution s = solve_dare(p);
      CHECK((s.Pi - s.Pi.transpose()).norm() / s.Pi.norm() <= 1e-10);
      const Eigen::SelfAdjointEigenSolver<Matrix> es(s.Pi);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff());
      CHECK(dare_residual(p, s.Pi) <= 1e-10);
      CHECK((feedback_gain(p, s.Pi) - s.K).norm() <= 1e-12 * (1.0 + s.K.norm()));
    }
  }

  TEST_CASE("common scaling of Q and R leaves K unchanged") {
    std::mt19937_64 g(8);
    const LqProblem p = random_problem(3, 2, g);
    LqProblem q = p;
    q.Q *= 7.5;
    q.R *= 7.5;
    const RiccatiSolution a = solve_dare(p), b = solve_dare(q);
    CHECK((b.Pi / 7.5 - a.Pi).norm() <= 1e-9 * a.Pi.norm());
    CHECK((b.K - a.K).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("feedback gain edge cases") {
    const LqProblem p = scalar(1, 1, 1, 1);
    const double pi = (1.0 + std::sqrt(5.0)) / 2.0;
    CHECK(feedback_gain(p, Matrix::Constant(1, 1, pi))(0, 0) == doctest::Approx(0.6180340).epsilon(1e-7));
    CHECK(feedback_gain(scalar(1, 0, 1, 1), Matrix::Constant(1, 1, 2.0))(0, 0) == 0.0);
    const Vector z = Vector::Zero(1);
    CHECK((-feedback_gain(p, Matrix::Constant(1, 1, pi)) * z).norm() == 0.0);
  }

  TEST_CASE("solver errors") {
    DareOptions o;
    o.method = DareMethod::FixedPoint;
    o.max_iter = 3;
    CHECK_THROWS_AS(solve_dare(constant_kernel_binary_problem(1.0, 1.0, 1, 1e-3), o), NonConvergence);
    try {
      solve_dare(constant_kernel_binary_problem(1.0, 1.0, 1, 1e-3), o);
    } catch (const NonConvergence& e) {
      CHECK(e.iterations() == 3);
      CHECK(e.residual() > o.tol);
    }
    LqProblem p = scalar(1, 0, 1, 0);
    DareOptions nv;
    nv.validate = false;
    CHECK_THROWS_AS(solve_dare(p, nv), SingularInnerSolve);
    CHECK_THROWS_AS(solve_dare(p), InvalidParameter);
    LqProblem bad = scalar(1, 1, 1, 1);
    bad.B = Matrix::Ones(2, 1);
    CHECK_THROWS_AS(solve_dare(bad), ShapeMismatch);
  }

  TEST_CASE("closed-form binary Riccati") {
    const BinaryOracle o0 = analytic_binary_riccati(0.0, 1.0);
    CHECK(o0.pi_d == doctest::Approx(1.0));
    CHECK(o0.pi_o == doctest::Approx(0.0));
    const BinaryOracle o1 = analytic_binary_riccati(1.0, 1.0);
    CHECK(o1.pi_d == doctest::Approx(0.6180340).epsilon(1e-7));
    CHECK(o1.pi_o == doctest::Approx(0.3819660).epsilon(1e-7));
    for (double p : {0.0, 0.5, 1.0, 2.0, 5.0}) {
      for (double g : {0.01, 0.5, 1.0, 2.0}) {
        const BinaryOracle o = analytic_binary_riccati(p, g);
        CHECK(o.pi_d + o.pi_o == doctest::Approx(std::sqrt(g)).epsilon(1e-12));
        CHECK(limit_equation_residual(o, 1) <= 1e-10);
        CHECK(limit_equation_residual(o, 3) <= 1e-10);
      }
    }
    CHECK_THROWS_AS(analytic_binary_riccati(1.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(analytic_binary_riccati(1.0, -1.0), InvalidParameter);
  }

  TEST_CASE("closed-form binary feedback") {
    const BinaryOracle o = analytic_binary_riccati(1.0, 1.0);
    const auto [u0, us0] = analytic_binary_feedback(Vector::Zero(2), Vector::Zero(2), o);
    CHECK(u0.norm() == 0.0);
    CHECK(us0.norm() == 0.0);
    const auto [u, us] = analytic_binary_feedback(Vector::Constant(1, 1.0), Vector::Constant(1, -1.0), o);
    CHECK(u(0) == doctest::Approx(-0.2360680).epsilon(1e-6));
    CHECK(us(0) == doctest::Approx(0.2360680).epsilon(1e-6));
    std::mt19937_64 g(2);
    std::normal_distribution<double> N;
    for (int k = 0; k < 10; ++k) {
      const Vector v = Vector::NullaryExpr(3, [&] { return N(g); });
      const Vector w = Vector::NullaryExpr(3, [&] { return N(g); });
      const auto [a, as] = analytic_binary_feedback(v, w, o);
      const auto [b, bs] = analytic_binary_feedback(w, v, o);
      CHECK(a == bs);
      CHECK(as == b);
    }
  }

  TEST_CASE("dt-embedded gain converges to the limit feedback at first order") {
    const double p = 1.0, gamma = 0.5;
    const BinaryOracle o = analytic_binary_riccati(p, gamma);
    Vector z(2);
    z << 0.7, -0.2;
    const auto [u, us] = analytic_binary_feedback(z.head(1), z.tail(1), o);
    Vector limit(2);
    limit << u(0), us(0);
    std::vector<double> err;
    for (double dt : {1e-2, 1e-3, 1e-4}) {
      const LqProblem prob = constant_kernel_binary_problem(p, gamma, 1, dt);
      const RiccatiSolution s = solve_dare(prob);
      err.push_back((-s.K * z - limit).norm());
    }
    CHECK(err[1] < err[0]);
    CHECK(err[2] < err[1]);
    const double rate1 = std::log10(err[0] / err[1]);
    const double rate2 = std::log10(err[1] / err[2]);
    CHECK(rate1 == doctest::Approx(1.0).epsilon(0.2));
    CHECK(rate2 == doctest::Approx(1.0).epsilon(0.2));
  }
}
