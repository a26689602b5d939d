#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "kf/error.hpp"
#include "kf/oracle.hpp"
#include "kf/sdre.hpp"

using namespace kf;
namespace fs = std::filesystem;

namespace {

Vector random_pair(const ModelSpec& spec, std::mt19937_64& g) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int d = spec.d;
  Vector s(spec.state_dim());
  const int blocks = spec.order == Order::First ? 1 : 2;
  for (int b = 0; b < blocks; ++b) {
    for (int a = 0; a < 2; ++a) {
      for (int k = 0; k < d; ++k) {
        const double lo = spec.domain_lo(b * d + k), hi = spec.domain_hi(b * d + k);
        s(2 * b * d + a * d + k) = lo + (hi - lo) * U(g);
      }
    }
  }
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kf_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Finite-horizon LQ optimum from the backward Riccati sweep with zero terminal cost.
double finite_horizon_optimum(const LqProblem& prob, const Vector& z0, int N) {
  Matrix P = Matrix::Zero(prob.state_dim(), prob.state_dim());
  for (int n = 0; n < N; ++n) {
    const Matrix S = prob.R + prob.B.transpose() * P * prob.B;
    P = prob.Q + prob.A.transpose() * P * prob.A -
        prob.A.transpose() * P * prob.B * S.ldlt().solve(prob.B.transpose() * P * prob.A);
  }
  return z0.dot(P * z0);
}

}  // namespace

TEST_SUITE("sdre") {
  TEST_CASE("consensus state needs no control") {
    std::mt19937_64 g(1);
    const ModelSpec spec = make_cucker_smale(3);
    for (int k = 0; k < 20; ++k) {
      Vector s = random_pair(spec, g);
      s.segment(9, 3) = s.segment(6, 3);
      const Vector u = dsdre_control(spec, s, 0.05);
      CHECK(u.norm() <= 1e-8 * (1.0 + s.norm()));
    }
  }

  TEST_CASE("constant-kernel control matches the closed form") {
    const ModelSpec spec = make_constant_kernel(1.0, 1.0, 1);
    Vector s(2);
    s << 1.0, -1.0;
    const Vector u = dsdre_control(spec, s, 1e-4);
    CHECK(u(0) == doctest::Approx(-0.23607).epsilon(1e-3 / 0.23607));
    CHECK(u(1) == doctest::Approx(0.23607).epsilon(1e-3 / 0.23607));
    PairState ps = PairState::from_stacked(spec, s, 1e-4);
    CHECK((dsdre_control(spec, ps) - u).norm() == 0.0);
  }

  TEST_CASE("control converges to the closed form at first order in dt") {
    const double p = 2.0, gamma = 0.5;
    const ModelSpec spec = make_constant_kernel(p, gamma, 1);
    const BinaryOracle o = analytic_binary_riccati(p, gamma);
    Vector s(2);
    s << 0.3, 0.9;
    const auto [u, us] = analytic_binary_feedback(s.head(1), s.tail(1), o);
    std::vector<double> err;
    for (double dt : {1e-2, 1e-3, 1e-4}) {
      const Vector c = dsdre_control(spec, s, dt);
      err.push_back(std::hypot(c(0) - u(0), c(1) - us(0)));
    }
    CHECK(std::log10(err[0] / err[1]) == doctest::Approx(1.0).epsilon(0.2));
    CHECK(std::log10(err[1] / err[2]) == doctest::Approx(1.0).epsilon(0.2));
  }

  TEST_CASE("swapping the agents permutes the control") {
    std::mt19937_64 g(2);
    for (const ModelSpec& spec : {make_cucker_smale(3), make_sznajd(), make_quasi_morse()}) {
      for (int k = 0; k < 10; ++k) {
        const Vector s = random_pair(spec, g);
        const Vector u = dsdre_control(spec, s, 0.05);
        const Vector w = dsdre_control(spec, swap_agents(spec, s), 0.05);
        CHECK((swap_controls(spec, w) - u).norm() <= 1e-10 * (1.0 + u.norm()));
      }
    }
  }

  TEST_CASE("trajectory from consensus stays at consensus") {
    const ModelSpec spec = make_cucker_smale(3);
    std::mt19937_64 g(3);
    Vector s = random_pair(spec, g);
    s.segment(9, 3) = s.segment(6, 3);
    const auto traj = mpc_dsdre_trajectory(spec, s, 0.05, 30);
    CHECK(traj.size() == 31);
    CHECK(traj.back().control.size() == 0);
    for (const TrajectoryStep& st : traj) {
      CHECK((st.state.segment(6, 3) - st.state.segment(9, 3)).norm() <= 1e-12);
    }
  }

  TEST_CASE("Cucker-Smale pairs reach consensus monotonically") {
    const ModelSpec spec = make_cucker_smale(3);
    std::mt19937_64 g(4);
    for (int k = 0; k < 10; ++k) {
      const auto traj = mpc_dsdre_trajectory(spec, random_pair(spec, g), 0.05, 100);
      double prev = std::numeric_limits<double>::infinity();
      bool monotone = true;
      // Round-off level of the initial gap.
      const double floor = 1e-14 * (traj.front().state.segment(6, 3) - traj.front().state.segment(9, 3)).norm();
      for (const TrajectoryStep& st : traj) {
        const double gap = (st.state.segment(6, 3) - st.state.segment(9, 3)).norm();
        monotone = monotone && gap <= prev * (1.0 + 1e-12) + floor;
        prev = gap;
      }
      CHECK(monotone);
      CHECK(prev < 1e-2);
    }
  }

  TEST_CASE("uncontrolled Sznajd polarizes") {
    const ModelSpec spec = make_sznajd(-1.0);
    Vector s(2);
    s << 0.2, -0.3;
    TrajectoryOptions o;
    o.zero_control = true;
    const auto traj = mpc_dsdre_trajectory(spec, s, 0.05, 400, o);
    CHECK(traj.back().state(0) > 0.9);
    CHECK(traj.back().state(1) < -0.9);
    CHECK(traj.back().state.cwiseAbs().maxCoeff() <= 1.0);
  }

  TEST_CASE("trajectory errors carry the step index") {
    const ModelSpec spec = make_cucker_smale(2);
    TrajectoryOptions o;
    o.dare.method = DareMethod::FixedPoint;
    o.dare.max_iter = 2;
    std::mt19937_64 g(5);
    try {
      mpc_dsdre_trajectory(spec, random_pair(spec, g), 0.05, 5, o);
      FAIL("expected a solver error");
    } catch (const NonConvergence& e) {
      CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
    CHECK_THROWS_AS(mpc_dsdre_trajectory(spec, random_pair(spec, g), 0.05, 0), InvalidParameter);
  }

  TEST_CASE("dataset records are consistent and deterministic") {
    const ModelSpec spec = make_cucker_smale(2);
    DatasetConfig cfg;
    cfg.n_samples = 500;
    cfg.seed = 42;
    const Dataset a = generate_dataset(spec, cfg);
    REQUIRE(a.records.size() == 500);
    CHECK(a.train_indices.size() == 400);
    CHECK(a.val_indices.size() == 100);
    std::vector<std::size_t> all = a.train_indices;
    all.insert(all.end(), a.val_indices.begin(), a.val_indices.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    for (std::size_t i = 0; i < a.records.size(); i += 25) {
      const DataRecord& r = a.records[i];
      CHECK(r.dt >= cfg.dt_lo);
      CHECK(r.dt <= cfg.dt_hi);
      CHECK((r.state.array() >= spec.domain_lo(0)).all());
      CHECK((r.state.array() <= spec.domain_hi(0)).all());
      CHECK(dsdre_control(spec, r.state, r.dt) == r.control);
      const SemilinearPair sp = semilinearize(spec, r.state, r.dt);
      CHECK((sp.A * r.state + sp.B * r.control - r.next_state).norm() <= 1e-12 * (1.0 + r.state.norm()));
    }

    const fs::path dir = temp_dir("dataset");
    write_dataset_csv(dir / "a.csv", a);
    const Dataset b = generate_dataset(spec, cfg);
    write_dataset_csv(dir / "b.csv", b);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

    const DatasetTable t = read_dataset_csv(dir / "a.csv");
    CHECK(t.kappa == 8);
    CHECK(t.mu == 4);
    REQUIRE(t.inputs.rows() == 500);
    for (std::size_t i = 0; i < 500; i += 50) {
      const Index r = static_cast<Index>(i);
      CHECK(t.inputs.row(r).head(8).transpose() == a.records[i].state);
      CHECK(t.inputs(r, 8) == a.records[i].dt);
      CHECK(t.controls.row(r).transpose() == a.records[i].control);
      CHECK(t.next_states.row(r).transpose() == a.records[i].next_state);
    }
    const std::string header = slurp(dir / "a.csv").substr(0, 60);
    CHECK(header.rfind("s_1,s_2,", 0) == 0);

    setenv("SOURCE_DATE_EPOCH", "0", 1);
    write_dataset_metadata(dir / "a.meta.json", a);
    write_dataset_metadata(dir / "b.meta.json", b);
    unsetenv("SOURCE_DATE_EPOCH");
    CHECK(slurp(dir / "a.meta.json") == slurp(dir / "b.meta.json"));
    const DatasetSplit split = read_dataset_split(dir / "a.meta.json");
    CHECK(split.train == a.train_indices);
    CHECK(split.val == a.val_indices);
  }

  TEST_CASE("dataset generation stalls when solves keep failing") {
    DatasetConfig cfg;
    cfg.n_samples = 50;
    cfg.dare.method = DareMethod::FixedPoint;
    cfg.dare.max_iter = 1;
    cfg.max_attempts_per_sample = 2;
    CHECK_THROWS_AS(generate_dataset(make_cucker_smale(2), cfg), DatasetGenerationStalled);
    DatasetConfig zero;
    zero.n_samples = 0;
    CHECK_THROWS_AS(generate_dataset(make_cucker_smale(2), zero), InvalidParameter);
  }

  TEST_CASE("reading an empty dataset is an error") {
    const fs::path dir = temp_dir("empty");
    std::ofstream(dir / "e.csv").close();
    CHECK_THROWS_AS(read_dataset_csv(dir / "e.csv"), ConfigError);
  }

  TEST_CASE("direct minimization matches the backward Riccati sweep") {
    for (double gamma : {0.05, 1.0}) {
      const LqProblem prob = constant_kernel_binary_problem(1.0, gamma, 1, 0.01);
      Vector z0(2);
      z0 << 1.0, -0.5;
      const DirectOcpResult r = direct_lq_minimize(prob, z0, 200);
      const double ref = finite_horizon_optimum(prob, z0, 200);
      CHECK(r.cost == doctest::Approx(ref).epsilon(1e-9));
    }
  }

  TEST_CASE("closed-loop DSDRE cost is within 1% of the direct minimum") {
    Vector z0(2);
    z0 << 1.0, -0.5;
    const BruteForceCheck c = brute_force_check(1.0, 0.05, 0.01, 200, z0);
    CHECK(c.relative_gap >= -1e-9);
    CHECK(c.relative_gap <= 0.01);
  }
}
