#include "kf/sdre.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <sstream>

#include "kf/error.hpp"
#include "kf/rng.hpp"

namespace kf {

Vector PairState::stacked() const {
  const Index d = x.size();
  const bool second = v.size() > 0;
  Vector s(second ? 4 * d : 2 * d);
  s.segment(0, d) = x;
  s.segment(d, d) = x_star;
  if (second) {
    s.segment(2 * d, d) = v;
    s.segment(3 * d, d) = v_star;
  }
  return s;
}

PairState PairState::from_stacked(const ModelSpec& spec, const Eigen::Ref<const Vector>& s, double dt) {
  if (s.size() != spec.state_dim()) throw ShapeMismatch("PairState::from_stacked: wrong dimension");
  const int d = spec.d;
  PairState p;
  p.x = s.segment(0, d);
  p.x_star = s.segment(d, d);
  if (spec.order == Order::Second) {
    p.v = s.segment(2 * d, d);
    p.v_star = s.segment(3 * d, d);
  }
  p.dt = dt;
  return p;
}

Vector dsdre_control(const ModelSpec& spec, const Eigen::Ref<const Vector>& s, double dt,
                     const DareOptions& opts) {
  const SemilinearPair sl = semilinearize(spec, s, dt);
  const CostMatrices cm = cost_matrices(spec, dt);
  LqProblem prob{sl.A, sl.B, cm.Q, cm.R};
  DareOptions o = opts;
  o.validate = false;
  const RiccatiSolution sol = solve_dare(prob, o);
  return -sol.K * s;
}

Vector dsdre_control(const ModelSpec& spec, const PairState& s, const DareOptions& opts) {
  return dsdre_control(spec, s.stacked(), s.dt, opts);
}

std::vector<TrajectoryStep> mpc_dsdre_trajectory(const ModelSpec& spec, const Eigen::Ref<const Vector>& s0,
                                                 double dt, int n_steps, const TrajectoryOptions& opts) {
  if (n_steps < 1) throw InvalidParameter("mpc_dsdre_trajectory: n_steps must be >= 1");
  validate(spec);
  std::vector<TrajectoryStep> out;
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  Vector s = s0;
  for (int n = 0; n < n_steps; ++n) {
    const SemilinearPair sl = semilinearize(spec, s, dt);
    Vector u = Vector::Zero(spec.control_dim());
    if (!opts.zero_control) {
      try {
        const CostMatrices cm = cost_matrices(spec, dt);
        DareOptions o = opts.dare;
        o.validate = false;
        u = -solve_dare(LqProblem{sl.A, sl.B, cm.Q, cm.R}, o).K * s;
      } catch (const NonConvergence& e) {
        throw NonConvergence(e.iterations(), e.residual(),
                             "step " + std::to_string(n) + ": " + e.what());
      } catch (const SingularInnerSolve& e) {
        throw SingularInnerSolve("step " + std::to_string(n) + ": " + e.what());
      }
    }
    Vector next = sl.A * s + sl.B * u;
    if (opts.rule == UpdateRule::LiteralAlgorithm) next = s + dt * next;
    out.push_back({s, u});
    s = std::move(next);
  }
  out.push_back({s, Vector()});
  return out;
}

Dataset generate_dataset(const ModelSpec& spec, const DatasetConfig& cfg) {
  validate(spec);
  if (cfg.n_samples < 1) throw InvalidParameter("generate_dataset: n_samples must be >= 1");
  if (!(cfg.dt_lo >= 0.0) || !(cfg.dt_hi >= cfg.dt_lo)) {
    throw InvalidParameter("generate_dataset: dt range must satisfy 0 <= lo <= hi");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
    throw InvalidParameter("generate_dataset: train_fraction must be in (0, 1]");
  }

  const int kappa = spec.state_dim();
  const int agent = spec.agent_dim();
  const CostMatrices unit_cost = cost_matrices(spec, 1.0);

  Dataset data;
  data.spec = spec;
  data.config = cfg;
  data.records.resize(cfg.n_samples);
  std::vector<int> failed(cfg.n_samples, 0);
  std::vector<char> exhausted(cfg.n_samples, 0);

  const long n = static_cast<long>(cfg.n_samples);
#pragma omp parallel for schedule(dynamic, 64)
  for (long i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < cfg.max_attempts_per_sample; ++attempt) {
      CounterRng rng(cfg.seed, streams::kDataset ^ static_cast<std::uint64_t>(i),
                     static_cast<std::uint64_t>(attempt));
      Vector s(kappa);
      // Agent 1 then agent 2, per coordinate of the agent box.
      for (int a = 0; a < 2; ++a) {
        for (int k = 0; k < agent; ++k) {
          const double v = rng.uniform(spec.domain_lo(k), spec.domain_hi(k));
          // Stacked layout groups by block: positions (x, x*) then velocities (v, v*).
          const int block = k / spec.d;
          const int coord = k % spec.d;
          s(2 * block * spec.d + a * spec.d + coord) = v;
        }
      }
      const double dt = rng.uniform(cfg.dt_lo, cfg.dt_hi);
      try {
        const SemilinearPair sl = semilinearize(spec, s, dt);
        LqProblem prob{sl.A, sl.B, dt * unit_cost.Q, dt * unit_cost.R};
        DareOptions o = cfg.dare;
        o.validate = false;
        const RiccatiSolution sol = solve_dare(prob, o);
        Vector u = -sol.K * s;
        Vector next = sl.A * s + sl.B * u;
        if (cfg.rule == UpdateRule::LiteralAlgorithm) next = s + dt * next;
        if (!u.allFinite() || !next.allFinite()) throw NonFiniteState("non-finite record");
        data.records[static_cast<std::size_t>(i)] = DataRecord{std::move(s), dt, std::move(u), std::move(next)};
        break;
      } catch (const Error&) {
        ++failed[static_cast<std::size_t>(i)];
        if (attempt + 1 == cfg.max_attempts_per_sample) exhausted[static_cast<std::size_t>(i)] = 1;
      }
    }
  }

  data.failures = static_cast<std::size_t>(std::accumulate(failed.begin(), failed.end(), 0L));
  const bool any_exhausted = std::any_of(exhausted.begin(), exhausted.end(), [](char c) { return c != 0; });
  if (any_exhausted || static_cast<double>(data.failures) > 0.01 * static_cast<double>(cfg.n_samples)) {
    std::ostringstream os;
    os << "dataset generation stalled: " << data.failures << " failed Riccati solves for "
       << cfg.n_samples << " samples";
    throw DatasetGenerationStalled(data.failures, cfg.n_samples, os.str());
  }

  std::vector<std::size_t> perm(cfg.n_samples);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng split_rng(cfg.seed, streams::kSplit);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[split_rng.below(i)]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(cfg.train_fraction * static_cast<double>(cfg.n_samples)));
  data.train_indices.assign(perm.begin(), perm.begin() + static_cast<long>(n_train));
  data.val_indices.assign(perm.begin() + static_cast<long>(n_train), perm.end());
  std::sort(data.train_indices.begin(), data.train_indices.end());
  std::sort(data.val_indices.begin(), data.val_indices.end());
  return data;
}

}  // namespace kf
