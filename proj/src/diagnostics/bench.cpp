#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>

#include "kf/diagnostics.hpp"
#include "kf/error.hpp"
#include "kf/kinetic.hpp"
#include "kf/sdre.hpp"

namespace kf {
namespace {

ModelSpec with_dimension(const ModelSpec& base, int d) {
  ModelSpec s = base;
  s.d = d;
  const int blocks = base.order == Order::First ? 1 : 2;
  s.domain_lo.resize(blocks * d);
  s.domain_hi.resize(blocks * d);
  for (int b = 0; b < blocks; ++b) {
    s.domain_lo.segment(b * d, d).setConstant(base.domain_lo(b * base.d));
    s.domain_hi.segment(b * d, d).setConstant(base.domain_hi(b * base.d));
  }
  validate(s);
  return s;
}

std::unique_ptr<Controller> bench_controller(const BenchConfig& cfg, const ModelSpec& spec, const std::string& name) {
  const ControllerKind kind = controller_kind_from_string(name);
  if (kind == ControllerKind::Zero) return std::make_unique<ZeroController>();
  if (kind == ControllerKind::ExactDsdre) return std::make_unique<ExactDsdreController>();
  const bool control = kind == ControllerKind::NnControl;
  const std::string& file = control ? cfg.control_model_file : cfg.state_model_file;
  NetworkParams params;
  bool loaded = false;
  if (!file.empty()) {
    SurrogateModel m = load_model(std::filesystem::path(file));
    if (m.params.arch.input_size() == spec.state_dim() + 1) {
      params = std::move(m.params);
      loaded = true;
    }
  }
  if (!loaded) {
    // Timing does not depend on the weight values.
    params = glorot_init(preset_architecture(control ? cfg.control_preset : cfg.state_preset, spec.state_dim() + 1,
                                             spec.control_dim()),
                         cfg.seed);
  }
  check_surrogate_shape(spec, params);
  if (control) return std::make_unique<NnControlController>(std::move(params));
  return std::make_unique<NnStateUpdateController>(std::move(params));
}

}  // namespace

std::vector<BenchCell> bench_controllers(const BenchConfig& cfg) {
  if (cfg.repetitions < 1 || cfg.exact_repetitions < 1) throw InvalidParameter("bench: repetitions must be >= 1");
  if (cfg.n_steps < 1 || cfg.exact_steps < 1) throw InvalidParameter("bench: step counts must be >= 1");
  using clock = std::chrono::steady_clock;
  std::vector<BenchCell> cells;
  for (int d : cfg.d_values) {
    const ModelSpec spec = with_dimension(cfg.base, d);
    for (const std::string& name : cfg.controllers) {
      const std::unique_ptr<Controller> controller = bench_controller(cfg, spec, name);
      const bool exact = controller_kind_from_string(name) == ControllerKind::ExactDsdre;
      bool censor_rest = false;
      for (Index n : cfg.batch_sizes) {
        BenchCell cell;
        cell.controller = controller->name();
        cell.d = d;
        cell.n_particles = n;
        cell.n_steps = exact ? cfg.exact_steps : cfg.n_steps;
        if (censor_rest) {
          cell.censored = true;
          cells.push_back(cell);
          continue;
        }
        KineticConfig kc;
        kc.model = spec;
        kc.n_particles = n;
        kc.dt = cfg.dt;
        kc.epsilon = cfg.dt;
        kc.n_steps = cell.n_steps;
        kc.seed = cfg.seed;
        kc.snapshot_every = cell.n_steps;
        kc.initial = uniform_box(spec);
        if (cfg.warm_up && !exact) simulate(kc, *controller);
        std::vector<double> times;
        const int reps = exact ? cfg.exact_repetitions : cfg.repetitions;
        for (int r = 0; r < reps; ++r) {
          const auto t0 = clock::now();
          simulate(kc, *controller);
          times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
          if (times.back() > cfg.time_budget_seconds) {
            cell.censored = true;
            censor_rest = true;
            break;
          }
        }
        std::sort(times.begin(), times.end());
        cell.repetitions = static_cast<int>(times.size());
        cell.median_seconds = times.size() % 2 == 1
                                  ? times[times.size() / 2]
                                  : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
        cell.per_step_seconds = cell.median_seconds / cell.n_steps;
        cells.push_back(cell);
      }
    }
  }
  std::map<std::pair<int, Index>, double> exact_per_step;
  for (const BenchCell& c : cells) {
    if (c.controller == "exact_dsdre" && c.repetitions > 0) exact_per_step[{c.d, c.n_particles}] = c.per_step_seconds;
  }
  for (BenchCell& c : cells) {
    const auto it = exact_per_step.find({c.d, c.n_particles});
    if (it != exact_per_step.end() && c.per_step_seconds > 0.0) c.speedup_vs_exact = it->second / c.per_step_seconds;
  }
  return cells;
}

void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchCell>& cells) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "controller,d,n_particles,n_steps,repetitions,median_seconds,per_step_seconds,censored,speedup_vs_exact\n";
  for (const BenchCell& c : cells) {
    os << c.controller << ',' << c.d << ',' << c.n_particles << ',' << c.n_steps << ',' << c.repetitions << ','
       << format_double(c.median_seconds) << ',' << format_double(c.per_step_seconds) << ','
       << (c.censored ? 1 : 0) << ',' << format_double(c.speedup_vs_exact) << '\n';
  }
}

}  // namespace kf
