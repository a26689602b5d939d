#include <chrono>
#include <sstream>

#include "kf/error.hpp"
#include "kf/kinetic.hpp"

namespace kf {

std::string to_string(Scheme s) {
  return s == Scheme::SplitTransportInteraction ? "split" : "nanbu_simultaneous";
}

Scheme scheme_from_string(std::string_view name) {
  if (name == "split") return Scheme::SplitTransportInteraction;
  if (name == "nanbu_simultaneous" || name == "nanbu") return Scheme::NanbuSimultaneous;
  throw InvalidParameter("unknown scheme '" + std::string(name) + "'");
}

void validate(const KineticConfig& cfg) {
  validate(cfg.model);
  if (cfg.n_particles < 2) throw InvalidParameter("kinetic: n_particles must be >= 2");
  if (!(cfg.dt > 0.0) || !(cfg.dt <= cfg.epsilon)) throw InvalidParameter("kinetic: need 0 < dt <= epsilon");
  if (cfg.n_steps < 0) throw InvalidParameter("kinetic: n_steps must be >= 0");
  if (cfg.snapshot_every < 1) throw InvalidParameter("kinetic: snapshot_every must be >= 1");
  if (cfg.initial.dim() != 0) validate(cfg.initial);
}

ParticleEnsemble mc_step(const ParticleEnsemble& ens, const KineticConfig& cfg, const Controller& controller,
                         CostRecord* cost) {
  const ModelSpec& spec = cfg.model;
  const Index n = ens.size();
  const int d = spec.d;
  const bool second = spec.order == Order::Second;
  if (ens.positions.cols() != d || ens.velocities.cols() != (second ? d : 0)) {
    throw ShapeMismatch("mc_step: ensemble does not match the model dimension");
  }
  const auto step = static_cast<std::uint64_t>(ens.step_index);

  CounterRng pair_rng(cfg.seed, streams::kPairing, step);
  const std::vector<std::pair<Index, Index>> pairs = pair_particles(n, pair_rng);

  const double prob = cfg.dt / cfg.epsilon;
  std::vector<std::pair<Index, Index>> active;
  active.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (prob >= 1.0) {
      active.push_back(pairs[k]);
      continue;
    }
    CounterRng coin(cfg.seed, streams::kCollision ^ (step << 20), k);
    if (coin.uniform() < prob) active.push_back(pairs[k]);
  }

  const Index m = static_cast<Index>(active.size());
  RowMatrix S(m, spec.state_dim());
  for (Index r = 0; r < m; ++r) {
    const auto [i, j] = active[static_cast<std::size_t>(r)];
    S.row(r).segment(0, d) = ens.positions.row(i);
    S.row(r).segment(d, d) = ens.positions.row(j);
    if (second) {
      S.row(r).segment(2 * d, d) = ens.velocities.row(i);
      S.row(r).segment(3 * d, d) = ens.velocities.row(j);
    }
  }

  PairUpdate up;
  if (m > 0) {
    try {
      up = controller.apply(spec, S, cfg.epsilon);
    } catch (const ControllerFailure& e) {
      const auto [i, j] = active[static_cast<std::size_t>(e.first())];
      std::ostringstream os;
      os << "step " << ens.step_index << ", pair (" << i << ", " << j << "): " << e.what();
      throw ControllerFailure(i, j, os.str());
    }
  } else {
    up.post.resize(0, spec.state_dim());
    up.controls.resize(0, spec.control_dim());
  }

  ParticleEnsemble out = ens;
  const int off = spec.controlled_offset();
  for (Index r = 0; r < m; ++r) {
    const auto [i, j] = active[static_cast<std::size_t>(r)];
    if (second) {
      out.velocities.row(i) = up.post.row(r).segment(off, d);
      out.velocities.row(j) = up.post.row(r).segment(off + d, d);
    } else {
      out.positions.row(i) = up.post.row(r).segment(0, d);
      out.positions.row(j) = up.post.row(r).segment(d, d);
    }
  }
  if (second) {
    // Split: transport with post-interaction velocities. Nanbu: one
    // simultaneous update, positions move with the pre-interaction ones.
    const RowMatrix& v = cfg.scheme == Scheme::SplitTransportInteraction ? out.velocities : ens.velocities;
    out.positions += cfg.dt * v;
  }

  for (Index i = 0; i < n; ++i) {
    if (!out.positions.row(i).allFinite() || (second && !out.velocities.row(i).allFinite())) {
      std::ostringstream os;
      os << "non-finite state for particle " << i << " after step " << ens.step_index << " (t = " << ens.time
         << "); pre-step position " << ens.positions.row(i);
      throw NonFiniteState(os.str());
    }
  }

  if (cost != nullptr) {
    const CostMatrices cm = cost_matrices(spec, 1.0);
    cost->step = ens.step_index;
    cost->time = ens.time;
    cost->dt = cfg.dt;
    cost->n_particles = n;
    cost->n_interacting_pairs = m;
    cost->state_cost = 0.0;
    cost->control_cost = 0.0;
    for (Index r = 0; r < m; ++r) {
      cost->state_cost += S.row(r) * cm.Q * S.row(r).transpose();
      cost->control_cost += up.controls.row(r) * cm.R * up.controls.row(r).transpose();
    }
  }

  out.time = ens.time + cfg.dt;
  out.step_index = ens.step_index + 1;
  return out;
}

SimulationResult simulate_from(const ParticleEnsemble& initial, const KineticConfig& cfg, const Controller& controller) {
  validate(cfg);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  SimulationResult res;
  ParticleEnsemble ens = initial;
  const auto snap = [&] {
    res.snapshots.push_back(make_snapshot(ens, cfg.model));
    res.states.push_back(ens);
  };
  snap();
  double interaction = 0.0;
  for (int s = 0; s < cfg.n_steps; ++s) {
    CostRecord rec;
    const auto a = clock::now();
    ens = mc_step(ens, cfg, controller, &rec);
    interaction += std::chrono::duration<double>(clock::now() - a).count();
    res.costs.push_back(rec);
    if ((s + 1) % cfg.snapshot_every == 0 || s + 1 == cfg.n_steps) snap();
  }
  res.final_state = std::move(ens);
  res.seconds_interaction = interaction;
  res.seconds_total = std::chrono::duration<double>(clock::now() - t0).count();
  return res;
}

SimulationResult simulate(const KineticConfig& cfg, const Controller& controller) {
  validate(cfg);
  const InitialDistribution dist = cfg.initial.dim() != 0 ? cfg.initial : uniform_box(cfg.model);
  return simulate_from(sample_initial(dist, cfg.model, cfg.n_particles, cfg.seed), cfg, controller);
}

SimulationResult simulate(const KineticConfig& cfg) {
  validate(cfg);
  const std::unique_ptr<Controller> c = make_controller(cfg);
  return simulate(cfg, *c);
}

}  // namespace kf
