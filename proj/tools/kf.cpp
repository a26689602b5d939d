#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kf/config.hpp"
#include "kf/error.hpp"
#include "kf/oracle.hpp"

namespace fs = std::filesystem;
using namespace kf;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config;
  std::string preset;
  int threads = 0;
  std::vector<std::string> overrides;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
}

Json manifest(const std::string& command, const RunConfig& rc) {
  Json m = Json::object();
  m["command"] = command;
  m["threads"] = thread_count();
  m["config"] = rc.echo;
  return m;
}

RunConfig load(const Common& c) {
  std::optional<fs::path> file;
  if (!c.config.empty()) file = c.config;
  RunConfig rc = load_run_config(file, c.preset, c.overrides);
  fs::create_directories(rc.output_dir);
  return rc;
}

Json histogram_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

Json snapshot_json(const DensitySnapshot& s) {
  Json j = Json::object();
  j["t"] = s.time;
  j["step"] = s.step;
  j["n"] = s.n;
  j["raw"] = s.raw_ref;
  j["consensus"] = s.consensus;
  j["velocity_mean"] = std::vector<double>(s.velocity_mean.data(), s.velocity_mean.data() + s.velocity_mean.size());
  Json cov = Json::array();
  for (Index r = 0; r < s.velocity_cov.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(s.velocity_cov.cols()));
    for (Index c = 0; c < s.velocity_cov.cols(); ++c) row[static_cast<std::size_t>(c)] = s.velocity_cov(r, c);
    cov.push_back(row);
  }
  j["velocity_cov"] = cov;
  Json hs = Json::object();
  for (const auto& [name, h] : s.histograms) hs[name] = histogram_json(h);
  j["histograms"] = hs;
  return j;
}

// --- commands --------------------------------------------------------------

int cmd_gen_data(const RunConfig& rc) {
  const auto t0 = Clock::now();
  const Dataset data = generate_dataset(rc.model, rc.dataset.cfg);
  const double t_gen = seconds_since(t0);
  write_dataset_csv(rc.output(rc.dataset.csv), data);
  write_dataset_metadata(rc.output(rc.dataset.metadata), data);
  Json m = manifest("gen-data", rc);
  m["records"] = data.records.size();
  m["train"] = data.train_indices.size();
  m["validation"] = data.val_indices.size();
  m["failures"] = data.failures;
  m["seconds_generation"] = t_gen;
  m["outputs"] = {rc.dataset.csv, rc.dataset.metadata};
  write_json(rc.output("gen-data.manifest.json"), m);
  std::cout << "wrote " << data.records.size() << " records (" << data.train_indices.size() << " train, "
            << data.val_indices.size() << " validation) to " << rc.output(rc.dataset.csv).string() << '\n';
  return 0;
}

struct TrainingData {
  RowMatrix X_train, Y_train, X_val, Y_val;
  fs::path csv;
};

fs::path metadata_for(const fs::path& csv) {
  fs::path m = csv;
  m.replace_extension(".meta.json");
  return m;
}

RowMatrix rows(const RowMatrix& M, const std::vector<std::size_t>& idx) {
  RowMatrix out(static_cast<Index>(idx.size()), M.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= static_cast<std::size_t>(M.rows())) throw ConfigError("split index outside the dataset");
    out.row(static_cast<Index>(k)) = M.row(static_cast<Index>(idx[k]));
  }
  return out;
}

TrainingData load_training_data(const RunConfig& rc) {
  TrainingData td;
  td.csv = rc.training.dataset.empty() ? rc.output(rc.dataset.csv) : fs::path(rc.training.dataset);
  if (!fs::exists(td.csv)) throw ConfigError("training dataset " + td.csv.string() + " does not exist");
  const DatasetTable table = read_dataset_csv(td.csv);
  if (table.inputs.rows() == 0) throw ConfigError("training dataset " + td.csv.string() + " has no records");
  if (table.kappa != rc.model.state_dim() || table.mu != rc.model.control_dim()) {
    throw ConfigError("training dataset does not match the configured model");
  }
  const RowMatrix Y = rc.training.target == SurrogateKind::Control
                          ? table.controls
                          : RowMatrix(table.next_states.middleCols(rc.model.controlled_offset(), table.mu));
  const fs::path meta = metadata_for(td.csv);
  DatasetSplit split;
  if (fs::exists(meta)) {
    split = read_dataset_split(meta);
  } else {
    const auto n = static_cast<std::size_t>(table.inputs.rows());
    const auto n_train = static_cast<std::size_t>(rc.dataset.cfg.train_fraction * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? split.train : split.val).push_back(i);
  }
  if (split.train.empty() || split.val.empty()) throw ConfigError("training needs non-empty train and validation splits");
  td.X_train = rows(table.inputs, split.train);
  td.Y_train = rows(Y, split.train);
  td.X_val = rows(table.inputs, split.val);
  td.Y_val = rows(Y, split.val);
  return td;
}

Architecture configured_architecture(const RunConfig& rc) {
  const int in = rc.model.state_dim() + 1;
  const int out = rc.model.control_dim();
  const TrainingSection& t = rc.training;
  if (!t.preset.empty()) return preset_architecture(t.preset, in, out);
  if (t.layer == LayerKind::LstmCell) return make_lstm(in, t.hidden, out, t.activation, t.recurrent_activation);
  return make_fnn(in, t.hidden, out, t.activation);
}

Json report_json(const FitReport& r) {
  return {{"mse", r.mse}, {"rmse", r.rmse}, {"relative_rmse", r.relative_rmse}, {"mre", r.mre}, {"r2", r.r2}};
}

int cmd_train(const RunConfig& rc) {
  const TrainingData td = load_training_data(rc);
  const Architecture arch = configured_architecture(rc);
  const auto t0 = Clock::now();
  const TrainResult tr = train(arch, td.X_train, td.Y_train, td.X_val, td.Y_val, rc.training.cfg);
  const double t_train = seconds_since(t0);
  save_model(rc.output(rc.training.model), SurrogateModel{rc.training.target, tr.params});
  const FitReport rep = fit_report(tr.params, td.X_val, td.Y_val);
  Json m = manifest("train", rc);
  m["dataset"] = td.csv.string();
  m["architecture"] = arch.describe();
  m["n_parameters"] = tr.params.n_parameters();
  m["best_epoch"] = tr.history.best_epoch;
  m["train_loss"] = tr.history.train_loss;
  m["val_loss"] = tr.history.val_loss;
  m["validation"] = report_json(rep);
  m["seconds_training"] = t_train;
  m["outputs"] = {rc.training.model};
  write_json(rc.output("train.manifest.json"), m);
  std::cout << arch.describe() << ": validation relative RMSE " << rep.relative_rmse << ", MRE " << rep.mre
            << ", r2 " << rep.r2 << "\nwrote " << rc.output(rc.training.model).string() << '\n';
  return 0;
}

int cmd_tune(const RunConfig& rc) {
  const TrainingData td = load_training_data(rc);
  const int in = rc.model.state_dim() + 1;
  const int out = rc.model.control_dim();
  std::vector<Architecture> grid;
  if (rc.training.tune_grid == "presets") {
    for (const std::string& name : preset_names()) grid.push_back(preset_architecture(name, in, out));
  } else {
    grid = default_tuning_grid(in, out);
  }
  const auto t0 = Clock::now();
  const TuneResult res = tune(grid, td.X_train, td.Y_train, td.X_val, td.Y_val, rc.training.cfg);
  save_model(rc.output(rc.training.model), SurrogateModel{rc.training.target, res.best_params});
  Json m = manifest("tune", rc);
  Json entries = Json::array();
  for (const TuneEntry& e : res.report) {
    Json je = {{"architecture", e.arch.describe()}, {"n_parameters", e.n_parameters}, {"failed", e.failed}};
    if (e.failed) {
      je["error"] = e.error;
    } else {
      je["val_relative_rmse"] = e.val_relative_rmse;
    }
    entries.push_back(je);
    std::cout << e.arch.describe() << ": " << (e.failed ? "failed: " + e.error : std::to_string(e.val_relative_rmse))
              << '\n';
  }
  m["candidates"] = entries;
  m["best"] = res.best.describe();
  m["validation"] = report_json(fit_report(res.best_params, td.X_val, td.Y_val));
  m["seconds_tuning"] = seconds_since(t0);
  m["outputs"] = {rc.training.model};
  write_json(rc.output("tune.manifest.json"), m);
  std::cout << "best: " << res.best.describe() << "\nwrote " << rc.output(rc.training.model).string() << '\n';
  return 0;
}

int cmd_simulate(const RunConfig& rc) {
  const auto controller = make_controller(rc.kinetic);
  SimulationResult res = simulate(rc.kinetic, *controller);
  fs::create_directories(rc.output("snapshots"));
  Json snaps = Json::array();
  for (std::size_t k = 0; k < res.states.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshots/snapshot_%06ld.csv", res.states[k].step_index);
    write_snapshot_csv(rc.output(name), res.states[k]);
    res.snapshots[k].raw_ref = name;
    snaps.push_back(snapshot_json(res.snapshots[k]));
  }
  write_json(rc.output("snapshots.json"), snaps);
  {
    std::ofstream os(rc.output("costs.csv"), std::ios::binary);
    os << "step,t,dt,n_particles,n_interacting_pairs,state_cost,control_cost\n";
    for (const CostRecord& c : res.costs) {
      os << c.step << ',' << format_double(c.time) << ',' << format_double(c.dt) << ',' << c.n_particles << ','
         << c.n_interacting_pairs << ',' << format_double(c.state_cost) << ',' << format_double(c.control_cost)
         << '\n';
    }
  }
  const double J = running_cost(res.costs);
  const double consensus = res.snapshots.empty() ? 0.0 : res.snapshots.back().consensus;
  Json m = manifest("simulate", rc);
  m["controller"] = controller->name();
  m["running_cost"] = J;
  m["final_consensus"] = consensus;
  m["seconds_interaction"] = res.seconds_interaction;
  m["seconds_total"] = res.seconds_total;
  m["outputs"] = {"snapshots/", "snapshots.json", "costs.csv"};
  write_json(rc.output("simulate.manifest.json"), m);
  std::cout << controller->name() << ": running cost " << J << ", final consensus " << consensus << ", "
            << res.seconds_total << " s\n";
  return 0;
}

int cmd_mf1d(const RunConfig& rc) {
  KineticConfig kc = rc.kinetic;
  kc.controller = rc.meanfield.controller;
  kc.model_file = rc.meanfield.model_file;
  const auto controller = make_controller(kc);
  const auto t0 = Clock::now();
  const MeanFieldResult res = mf_simulate(rc.meanfield.cfg, *controller);
  write_density_csv(rc.output("meanfield_density.csv"), res.densities);
  write_control_csv(rc.output("meanfield_control.csv"), res.densities, res.controls);
  Json m = manifest("mf1d", rc);
  m["controller"] = controller->name();
  m["cost"] = res.cost;
  m["seconds_total"] = seconds_since(t0);
  m["outputs"] = {"meanfield_density.csv", "meanfield_control.csv"};
  write_json(rc.output("mf1d.manifest.json"), m);
  std::cout << "mean-field " << controller->name() << ": cost " << res.cost << '\n';
  return 0;
}

int cmd_oracle(const RunConfig& rc) {
  const OracleSection& o = rc.oracle;
  const RiccatiOracleReport rep = riccati_oracle(o.p, o.gamma, o.dt, o.tol, rc.dare);
  std::ofstream os(rc.output("oracle.csv"), std::ios::binary);
  os << "p,gamma,dt,max_error,iterations\n";
  for (const RiccatiOracleCell& c : rep.cells) {
    os << format_double(c.p) << ',' << format_double(c.gamma) << ',' << format_double(c.dt) << ','
       << format_double(c.max_error) << ',' << c.iterations << '\n';
    std::cout << "riccati p=" << c.p << " gamma=" << c.gamma << " dt=" << c.dt << " max_error=" << c.max_error
              << '\n';
  }
  bool ok = rep.passed();
  for (const std::string& f : rep.failures) std::cout << "FAIL " << f << '\n';
  Json m = manifest("oracle", rc);
  m["riccati_passed"] = rep.passed();
  m["riccati_failures"] = rep.failures;
  if (o.brute_force) {
    Vector z0(2);
    z0 << o.bf_z0[0], o.bf_z0[1];
    const BruteForceCheck bf = brute_force_check(o.bf_p, o.bf_gamma, o.bf_dt, o.bf_steps, z0, rc.dare);
    const bool bf_ok = std::abs(bf.relative_gap) <= o.bf_tol;
    std::cout << "brute-force p=" << bf.p << " gamma=" << bf.gamma << " dt=" << bf.dt << " steps=" << bf.n_steps
              << " dsdre=" << bf.dsdre_cost << " direct=" << bf.direct_cost << " gap=" << bf.relative_gap
              << (bf_ok ? " ok" : " FAIL") << '\n';
    m["brute_force"] = {{"dsdre_cost", bf.dsdre_cost}, {"direct_cost", bf.direct_cost},
                        {"relative_gap", bf.relative_gap}, {"passed", bf_ok}};
    ok = ok && bf_ok;
  }
  m["passed"] = ok;
  write_json(rc.output("oracle.manifest.json"), m);
  std::cout << (ok ? "oracle: PASS" : "oracle: FAIL") << '\n';
  return ok ? 0 : kExitRuntime;
}

int cmd_bench(const RunConfig& rc) {
  const std::vector<BenchCell> cells = bench_controllers(rc.bench);
  write_bench_csv(rc.output("bench.csv"), cells);
  Json m = manifest("bench", rc);
  m["outputs"] = {"bench.csv"};
  write_json(rc.output("bench.manifest.json"), m);
  for (const BenchCell& c : cells) {
    std::cout << c.controller << " d=" << c.d << " N=" << c.n_particles << " per_step=" << c.per_step_seconds
              << (c.censored ? " censored" : "") << " speedup=" << c.speedup_vs_exact << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic feedback control: data generation, surrogate training, particle and mean-field simulation"};
  app.require_subcommand(1);
  app.footer(config_help());

  Common common;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const std::vector<Command> commands{
      {"gen-data", "generate a labelled DSDRE dataset", cmd_gen_data},
      {"train", "train a surrogate network on a dataset", cmd_train},
      {"tune", "train a grid of architectures and keep the best", cmd_tune},
      {"simulate", "run the Monte Carlo particle simulation", cmd_simulate},
      {"mf1d", "run the one-dimensional mean-field reference solver", cmd_mf1d},
      {"oracle", "check the Riccati solver against closed-form and brute-force references", cmd_oracle},
      {"bench", "time the controllers on particle batches", cmd_bench},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", common.config, "JSON configuration file");
    sub->add_option("-p,--preset", common.preset, "parameter preset: test1, test2, test3");
    sub->add_option("-t,--threads", common.threads, "cap on worker threads (default: all cores)");
    sub->add_option("overrides", common.overrides, "key=value configuration overrides");
    sub->footer(config_help());
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

#ifdef _OPENMP
  if (common.threads > 0) omp_set_num_threads(common.threads);
#endif

  try {
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) return cmd->run(load(common));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
