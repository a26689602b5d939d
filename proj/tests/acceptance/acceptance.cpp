#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kf/config.hpp"
#include "kf/diagnostics.hpp"
#include "kf/kinetic.hpp"
#include "kf/linalg_control.hpp"
#include "kf/meanfield1d.hpp"
#include "kf/oracle.hpp"
#include "kf/rng.hpp"
#include "kf/sdre.hpp"

using namespace kf;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome riccati_oracle_check() {
  const auto t0 = Clock::now();
  const std::vector<double> grid{0.5, 1.0, 2.0};
  const RiccatiOracleReport rep = riccati_oracle(grid, grid, {1e-2, 1e-3, 1e-4}, 1e-3);
  double worst = 0.0;
  for (const RiccatiOracleCell& c : rep.cells) {
    if (c.dt == 1e-4) worst = std::max(worst, c.max_error);
  }
  const double spot = analytic_binary_riccati(1.0, 1.0).pi_d;
  const Matrix pi = solve_dare(constant_kernel_binary_problem(1.0, 1.0, 1, 1e-4)).Pi;
  const double secs = since(t0);
  Outcome o;
  o.pass = rep.passed() && std::abs(spot - 0.6180340) <= 5e-8 && std::abs(pi(0, 0) - 0.6180340) <= 1e-3 && secs < 1.0;
  o.detail = fmt("max error at dt=1e-4 %.3e, pi_D(1,1) limit %.7f, dt-embedded %.7f, %.3f s", worst, spot, pi(0, 0),
                 secs);
  for (const std::string& f : rep.failures) o.detail += "; " + f;
  return o;
}

Outcome brute_force_equivalence() {
  const auto t0 = Clock::now();
  Vector z0(2);
  z0 << 1.0, -0.5;
  const BruteForceCheck c = brute_force_check(1.0, 0.05, 0.01, 200, z0);
  const double secs = since(t0);
  Outcome o;
  o.pass = std::abs(c.relative_gap) <= 0.01 && secs < 60.0;
  o.detail = fmt("DSDRE cost %.8f, direct minimum %.8f, relative gap %.3e, %.2f s", c.dsdre_cost, c.direct_cost,
                 c.relative_gap, secs);
  return o;
}

// Test 2 settings at d = 3 with the 2e4-sample dataset.
RunConfig test2_d3() { return load_run_config(std::nullopt, "test2", {"model.d=3", "dataset.n_samples=20000"}); }

struct TrainedSurrogate {
  NetworkParams params;
  FitReport validation;
  double seconds = 0.0;
};

RowMatrix select(const RowMatrix& M, const std::vector<std::size_t>& idx) {
  RowMatrix out(static_cast<Index>(idx.size()), M.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = M.row(static_cast<Index>(idx[k]));
  return out;
}

TrainedSurrogate train_d3_surrogate() {
  const auto t0 = Clock::now();
  const RunConfig rc = test2_d3();
  const Dataset data = generate_dataset(rc.model, rc.dataset.cfg);
  const int kappa = rc.model.state_dim();
  const int mu = rc.model.control_dim();
  RowMatrix X(static_cast<Index>(data.records.size()), kappa + 1);
  RowMatrix Y(static_cast<Index>(data.records.size()), mu);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto r = static_cast<Index>(i);
    X.row(r).head(kappa) = data.records[i].state.transpose();
    X(r, kappa) = data.records[i].dt;
    Y.row(r) = data.records[i].control.transpose();
  }
  TrainConfig tc = rc.training.cfg;
  tc.learning_rate = 0.01;
  tc.epochs = 500;
  tc.early_stop_patience = 50;
  const RowMatrix Xt = select(X, data.train_indices), Yt = select(Y, data.train_indices);
  const RowMatrix Xv = select(X, data.val_indices), Yv = select(Y, data.val_indices);
  TrainedSurrogate s;
  s.params = train(preset_architecture("test3-u-fnn", kappa + 1, mu), Xt, Yt, Xv, Yv, tc).params;
  s.validation = fit_report(s.params, Xv, Yv);
  s.seconds = since(t0);
  return s;
}

Outcome surrogate_fidelity() {
  const TrainedSurrogate s = train_d3_surrogate();
  Outcome o;
  o.pass = s.validation.mre <= 0.05 && s.seconds < 600.0;
  o.detail = fmt("held-out MRE %.4f (relative RMSE %.4f, r2 %.5f), %.1f s", s.validation.mre,
                 s.validation.relative_rmse, s.validation.r2, s.seconds);
  return o;
}

Outcome closed_loop_fidelity() {
  const auto t0 = Clock::now();
  const TrainedSurrogate s = train_d3_surrogate();
  KineticConfig cfg = test2_d3().kinetic;
  cfg.n_particles = 10000;
  cfg.n_steps = 100;
  cfg.seed = 2024;
  cfg.snapshot_every = 100;
  const SimulationResult exact = simulate(cfg, ExactDsdreController{cfg.dare});
  const SimulationResult nn = simulate(cfg, NnControlController{s.params});
  const double j_exact = running_cost(exact.costs), j_nn = running_cost(nn.costs);
  const double c_exact = exact.snapshots.back().consensus, c_nn = nn.snapshots.back().consensus;
  const double c0 = exact.snapshots.front().consensus;
  const double dj = std::abs(j_nn - j_exact) / j_exact;
  const double dc = std::abs(c_nn - c_exact) / c_exact;
  Outcome o;
  o.pass = dj <= 0.05 && dc <= 0.10;
  o.detail = fmt("running cost exact %.6f nn %.6f (rel %.3e); final consensus exact %.3e nn %.3e (rel %.3e), "
                 "initial %.3e; %.1f s",
                 j_exact, j_nn, dj, c_exact, c_nn, dc, c0, since(t0));
  return o;
}

Outcome consensus_decay() {
  const auto t0 = Clock::now();
  const ModelSpec spec = test2_d3().model;
  const int n_pairs = 200;
  const int d = spec.d;
  int reached = 0;
  for (int k = 0; k < n_pairs; ++k) {
    CounterRng rng(77, 0, static_cast<std::uint64_t>(k));
    Vector s(spec.state_dim());
    for (int agent = 0; agent < 2; ++agent) {
      for (int c = 0; c < spec.agent_dim(); ++c) {
        const double x = rng.uniform(spec.domain_lo(c), spec.domain_hi(c));
        // agent layout: positions (x, x*) then velocities (v, v*).
        const int block = c < d ? 0 : 2 * d;
        s(block + agent * d + c % d) = x;
      }
    }
    const auto traj = mpc_dsdre_trajectory(spec, s, 0.05, 100);
    for (const TrajectoryStep& st : traj) {
      if ((st.state.segment(2 * d, d) - st.state.segment(3 * d, d)).norm() < 1e-2) {
        ++reached;
        break;
      }
    }
  }
  const double frac = static_cast<double>(reached) / n_pairs;
  const double secs = since(t0);
  Outcome o;
  o.pass = frac >= 0.95 && secs < 60.0;
  o.detail = fmt("%d of %d pairs reach |v - v*| < 1e-2 within 100 steps (%.1f%%), %.2f s", reached, n_pairs,
                 100.0 * frac, secs);
  return o;
}

Outcome speedup() {
  const auto t0 = Clock::now();
  BenchConfig b = load_run_config(std::nullopt, "test2", {}).bench;
  b.d_values = {15};
  b.batch_sizes = {10000};
  b.controllers = {"nn_control", "exact_dsdre"};
  b.n_steps = 100;
  b.exact_steps = 10;
  b.repetitions = 3;
  b.exact_repetitions = 1;
  b.time_budget_seconds = 1500.0;
  const std::vector<BenchCell> cells = bench_controllers(b);
  const BenchCell& nn = cells.at(0);
  const BenchCell& ex = cells.at(1);
  Outcome o;
  o.pass = !nn.censored && !ex.censored && nn.speedup_vs_exact >= 10.0;
  o.detail = fmt("per step: nn_control %.4f s, exact_dsdre %.3f s, speedup %.1f; %.0f s", nn.per_step_seconds,
                 ex.per_step_seconds, nn.speedup_vs_exact, since(t0));
  return o;
}

Outcome grazing_limit() {
  const auto t0 = Clock::now();
  const ModelSpec spec = make_sznajd(-1.0, 0.05);
  const InitialDistribution f0 = default_bimodal(spec);
  MeanFieldConfig mf;
  mf.model = spec;
  mf.M = 800;
  mf.dt = 0.0025;
  mf.n_steps = 400;
  mf.f0 = f0;
  const GridDensity ref = mf_simulate(mf, ZeroController{}).densities.back();

  const std::vector<double> eps{0.1, 0.05, 0.025};
  const int replicas = 8;
  std::vector<double> mean(eps.size()), se(eps.size());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    std::vector<double> w;
    for (int r = 0; r < replicas; ++r) {
      KineticConfig kc;
      kc.model = spec;
      kc.controller = ControllerKind::Zero;
      kc.n_particles = 100000;
      kc.dt = kc.epsilon = eps[e];
      kc.n_steps = static_cast<int>(std::lround(1.0 / eps[e]));
      kc.snapshot_every = kc.n_steps;
      kc.initial = f0;
      kc.seed = 500 + static_cast<std::uint64_t>(r);
      const ParticleEnsemble fin = simulate(kc, ZeroController{}).final_state;
      const std::vector<double> x(fin.positions.data(), fin.positions.data() + fin.positions.size());
      w.push_back(wasserstein1_1d(x, ref.nodes, ref.values));
    }
    double m = 0.0;
    for (double v : w) m += v;
    m /= replicas;
    double var = 0.0;
    for (double v : w) var += (v - m) * (v - m);
    var /= replicas - 1;
    mean[e] = m;
    se[e] = std::sqrt(var / replicas);
  }
  Outcome o;
  o.pass = true;
  for (std::size_t e = 0; e + 1 < eps.size(); ++e) {
    if (mean[e + 1] > mean[e] + 2.0 * std::hypot(se[e], se[e + 1])) o.pass = false;
  }
  const double secs = since(t0);
  o.pass = o.pass && secs < 600.0;
  for (std::size_t e = 0; e < eps.size(); ++e) o.detail += fmt("eps=%.3f W1=%.4e+-%.1e; ", eps[e], mean[e], se[e]);
  o.detail += fmt("%.1f s", secs);
  return o;
}

// --- invariant suite ---------------------------------------------------------

double grad_check(NetworkParams p, const RowMatrix& X, const RowMatrix& Y) {
  const std::vector<LayerParams> g = loss_gradient(p, X, Y);
  const double h = 1e-5;  // near cbrt(machine epsilon)
  double worst = 0.0;
  auto probe = [&](double& w, double an) {
    const double keep = w;
    w = keep + h;
    const double fp = normalized_mse(p, X, Y);
    w = keep - h;
    const double fm = normalized_mse(p, X, Y);
    w = keep;
    const double fd = (fp - fm) / (2 * h);
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (std::size_t t = 0; t < p.layers[l].W.size(); ++t) {
      for (Index i = 0; i < p.layers[l].W[t].size(); ++i) probe(p.layers[l].W[t].data()[i], g[l].W[t].data()[i]);
      for (Index i = 0; i < p.layers[l].b[t].size(); ++i) probe(p.layers[l].b[t](i), g[l].b[t](i));
    }
  }
  return worst;
}

bool same_params(const NetworkParams& a, const NetworkParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (std::size_t t = 0; t < a.layers[l].W.size(); ++t) {
      if (a.layers[l].W[t] != b.layers[l].W[t] || a.layers[l].b[t] != b.layers[l].b[t]) return false;
    }
  }
  return true;
}

Vector random_state(const ModelSpec& spec, CounterRng& rng) {
  Vector s(spec.state_dim());
  const int a = spec.agent_dim();
  const int d = spec.d;
  for (int agent = 0; agent < 2; ++agent) {
    for (int c = 0; c < a; ++c) {
      const int idx = spec.order == Order::First ? agent * d + c : (c < d ? 0 : 2 * d) + agent * d + c % d;
      s(idx) = rng.uniform(spec.domain_lo(c), spec.domain_hi(c));
    }
  }
  return s;
}

Outcome invariants() {
  const auto t0 = Clock::now();
  std::vector<std::string> failed;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  // particle count and momentum
  {
    KineticConfig cfg;
    cfg.model = make_cucker_smale(3);
    cfg.controller = ControllerKind::Zero;
    cfg.n_particles = 10001;
    cfg.dt = cfg.epsilon = 0.05;
    const ZeroController z;
    ParticleEnsemble e = sample_initial(uniform_box(cfg.model), cfg.model, cfg.n_particles, 3);
    double drift = 0.0;
    for (int s = 0; s < 50; ++s) {
      const Vector before = e.velocities.colwise().sum();
      e = mc_step(e, cfg, z);
      require(e.size() == cfg.n_particles, "particle count");
      drift = std::max(drift, (e.velocities.colwise().sum().transpose() - before).cwiseAbs().maxCoeff());
    }
    require(drift <= 1e-10 * static_cast<double>(cfg.n_particles), fmt("momentum drift %.3e", drift));
    KineticConfig ex = cfg;
    ex.controller = ControllerKind::ExactDsdre;
    ex.n_particles = 501;
    ex.n_steps = 5;
    require(simulate(ex).final_state.size() == 501, "particle count under control");
  }

  // swap symmetry and zero control at consensus
  {
    CounterRng rng(21);
    double worst_swap = 0.0, worst_consensus = 0.0;
    for (const ModelSpec& spec : {make_sznajd(), make_cucker_smale(3), make_quasi_morse(), make_constant_kernel(1, 1, 2)}) {
      for (int k = 0; k < 50; ++k) {
        const Vector s = random_state(spec, rng);
        const Vector u = dsdre_control(spec, s, 0.05);
        const Vector w = dsdre_control(spec, swap_agents(spec, s), 0.05);
        worst_swap = std::max(worst_swap, (swap_controls(spec, w) - u).norm() / (1.0 + u.norm()));
        if (spec.target == Target::PairMean && spec.kind != ModelKind::QuasiMorse) {
          Vector c = s;
          const int off = spec.controlled_offset();
          c.segment(off + spec.d, spec.d) = c.segment(off, spec.d);
          const CostMatrices cm = cost_matrices(spec, 0.05);
          worst_consensus = std::max({worst_consensus, (cm.Q * c).norm(), dsdre_control(spec, c, 0.05).norm()});
        }
      }
    }
    require(worst_swap <= 1e-10, fmt("swap symmetry %.3e", worst_swap));
    require(worst_consensus <= 1e-12, fmt("consensus control %.3e", worst_consensus));
  }

  // gradient checks
  {
    std::mt19937_64 g(5);
    std::normal_distribution<double> N;
    const RowMatrix X = RowMatrix::NullaryExpr(12, 5, [&] { return N(g); });
    const RowMatrix Y = RowMatrix::NullaryExpr(12, 2, [&] { return N(g); });
    double worst = 0.0;
    for (Activation a : {Activation::Softplus, Activation::Tanh, Activation::Sigmoid, Activation::Elu}) {
      worst = std::max(worst, grad_check(glorot_init(make_fnn(5, {7, 6}, 2, a), 1), X, Y));
      worst = std::max(worst, grad_check(glorot_init(make_lstm(5, {6}, 2, a, Activation::Sigmoid), 2), X, Y));
    }
    worst = std::max(worst, grad_check(glorot_init(preset_architecture("test3-s-rnn", 5, 2), 3), X, Y));
    require(worst <= 1e-4, fmt("gradient check %.3e", worst));
  }

  // determinism of every seeded stage
  {
    const ModelSpec cs = make_cucker_smale(2);
    DatasetConfig dc;
    dc.n_samples = 300;
    dc.seed = 9;
    const Dataset a = generate_dataset(cs, dc), b = generate_dataset(cs, dc);
    bool same = a.records.size() == b.records.size() && a.train_indices == b.train_indices;
    for (std::size_t i = 0; same && i < a.records.size(); ++i) {
      same = a.records[i].state == b.records[i].state && a.records[i].control == b.records[i].control &&
             a.records[i].dt == b.records[i].dt && a.records[i].next_state == b.records[i].next_state;
    }
    require(same, "dataset determinism");

    RowMatrix X(static_cast<Index>(a.records.size()), cs.state_dim() + 1);
    RowMatrix Y(static_cast<Index>(a.records.size()), cs.control_dim());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      X.row(static_cast<Index>(i)) << a.records[i].state.transpose(), a.records[i].dt;
      Y.row(static_cast<Index>(i)) = a.records[i].control.transpose();
    }
    TrainConfig tc;
    tc.epochs = 5;
    const Architecture arch = make_fnn(cs.state_dim() + 1, {16}, cs.control_dim(), Activation::Tanh);
    const TrainResult t1 = train(arch, X, Y, X, Y, tc), t2 = train(arch, X, Y, X, Y, tc);
    require(same_params(t1.params, t2.params) && t1.history.val_loss == t2.history.val_loss, "training determinism");

    KineticConfig kc;
    kc.model = cs;
    kc.n_particles = 300;
    kc.n_steps = 5;
    kc.controller = ControllerKind::ExactDsdre;
    const SimulationResult s1 = simulate(kc), s2 = simulate(kc);
    require(s1.final_state.positions == s2.final_state.positions && s1.final_state.velocities == s2.final_state.velocities,
            "simulation determinism");
    const NnControlController nn(t1.params);
    const SimulationResult n1 = simulate(kc, nn), n2 = simulate(kc, nn);
    require(n1.final_state.velocities == n2.final_state.velocities, "surrogate simulation determinism");

    MeanFieldConfig mf;
    mf.model = make_sznajd();
    mf.M = 101;
    mf.n_steps = 20;
    require(mf_simulate(mf, ExactDsdreController{}).densities.back().values ==
                mf_simulate(mf, ExactDsdreController{}).densities.back().values,
            "mean-field determinism");
  }

  const double secs = since(t0);
  require(secs < 300.0, fmt("runtime %.1f s", secs));
  Outcome o;
  o.pass = failed.empty();
  o.detail = fmt("%.1f s", secs);
  for (const std::string& f : failed) o.detail += "; failed: " + f;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"analytic Riccati oracle", riccati_oracle_check},
      {"brute-force OCP equivalence", brute_force_equivalence},
      {"surrogate fidelity (held-out MRE <= 5%)", surrogate_fidelity},
      {"closed-loop surrogate fidelity", closed_loop_fidelity},
      {"binary consensus decay", consensus_decay},
      {"surrogate speedup >= 10x", speedup},
      {"grazing-limit consistency", grazing_limit},
      {"invariant suite", invariants},
  };
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) which.push_back(i);
  }
  bool all = true;
  for (int k : which) {
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "no criterion " << k << '\n';
      return 2;
    }
    const auto& [name, run] = criteria[static_cast<std::size_t>(k - 1)];
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << k << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << " | " << o.detail
              << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
