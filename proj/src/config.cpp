#include "kf/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kf/error.hpp"

namespace kf {
namespace {

const Json null = nullptr;

std::vector<ConfigKey> build_keys() {
  using J = Json;
  return {
      {"preset", null, "parameter overlay applied before the file: test1, test2, test3 or null"},
      {"output_dir", "out", "directory for every output file (KF_OUTPUT_DIR overrides)"},

      {"model.kind", "cucker_smale", "sznajd | cucker_smale | quasi_morse | constant_kernel"},
      {"model.d", null, "agent dimension (null: 1 for first-order kinds, 15 cucker_smale, 3 quasi_morse)"},
      {"model.gamma", null, "control penalty gamma (null: 0.05 sznajd, 0.01 otherwise, 1 constant_kernel)"},
      {"model.target", null, "zero | pair_mean (null: zero for first-order kinds, pair_mean otherwise)"},
      {"model.beta", null, "sznajd beta (default -1) or quasi-morse propulsion beta (default 1.5)"},
      {"model.C", null, "quasi-morse repulsion strength C (default 0.6)"},
      {"model.p", null, "quasi-morse exponent p (default 1.5)"},
      {"model.l", null, "quasi-morse length ratio l (default 0.5)"},
      {"model.alpha", null, "quasi-morse self-propulsion alpha (default 2)"},
      {"model.kernel", null, "constant_kernel interaction strength (default 1)"},
      {"model.domain_lo", null, "sampling box lower bound: number or one value per agent coordinate"},
      {"model.domain_hi", null, "sampling box upper bound: number or one value per agent coordinate"},

      {"dare.tol", 1e-10, "Frobenius residual tolerance of the Riccati solver"},
      {"dare.max_iter", 10000, "iteration cap of the Riccati solver"},
      {"dare.method", "doubling", "doubling | fixed_point"},

      {"dataset.n_samples", 100000, "number of (s, dt) samples"},
      {"dataset.dt_range", J::array({0.001, 1.0}), "[lo, hi] of the uniformly sampled interaction time-step"},
      {"dataset.seed", 1, "generation seed"},
      {"dataset.train_fraction", 0.8, "fraction of samples in the training split"},
      {"dataset.update_rule", "discrete", "discrete (s' = As + Bu) | literal (s' = s + dt(As + Bu))"},
      {"dataset.max_attempts_per_sample", 100, "resampling attempts before a sample counts as failed"},
      {"dataset.csv", "dataset.csv", "dataset file name inside output_dir"},
      {"dataset.metadata", "dataset.meta.json", "metadata sidecar name inside output_dir"},

      {"training.preset", "test2-u-fnn", "architecture preset name, or null to use hidden/activation/layer"},
      {"training.hidden", J::array({100}), "hidden layer widths when no preset is given"},
      {"training.activation", "softplus", "identity | tanh | relu | softplus | elu | sigmoid"},
      {"training.recurrent_activation", "sigmoid", "gate activation of lstm layers"},
      {"training.layer", "dense", "dense | lstm hidden layers when no preset is given"},
      {"training.target", "control", "control (u) | state_update (controlled block of s')"},
      {"training.dataset", "", "dataset csv to train on (empty: output_dir/dataset.csv)"},
      {"training.model", "model.kfnn", "model file name inside output_dir"},
      {"training.learning_rate", 0.01, "Adam step size"},
      {"training.batch_size", 100, "mini-batch size"},
      {"training.epochs", 200, "maximum number of epochs"},
      {"training.adam_beta1", 0.9, "Adam first-moment decay"},
      {"training.adam_beta2", 0.999, "Adam second-moment decay"},
      {"training.adam_eps", 1e-8, "Adam denominator offset"},
      {"training.seed", 1, "initialization and shuffling seed"},
      {"training.early_stop_patience", 20, "epochs without validation improvement before stopping (0: off)"},
      {"training.tune_grid", "default", "tune candidates: default (fnn grid) | presets (the architecture presets)"},

      {"kinetic.controller", "exact_dsdre", "exact_dsdre | nn_control | nn_state_update | zero"},
      {"kinetic.model_file", "", "trained network for nn controllers"},
      {"kinetic.n_particles", 10000, "number of particles"},
      {"kinetic.dt", 0.05, "time-step"},
      {"kinetic.epsilon", 0.05, "interaction strength epsilon (dt <= epsilon)"},
      {"kinetic.n_steps", 100, "number of steps"},
      {"kinetic.scheme", "split", "split (interaction then transport) | nanbu_simultaneous"},
      {"kinetic.seed", 1, "sampling, pairing and collision seed"},
      {"kinetic.snapshot_every", 10, "snapshot period in steps"},
      {"kinetic.initial", null,
       "initial law {kind: uniform|gaussian|mixture|point_mass, lo, hi, mean, sigma, weights, means, sigmas}; "
       "null: uniform box for cucker_smale, bimodal mixture otherwise"},

      {"meanfield.M", 400, "grid nodes"},
      {"meanfield.dt", 0.01, "time-step, also the binary interaction strength"},
      {"meanfield.n_steps", 100, "number of steps"},
      {"meanfield.boundary", "clamp", "clamp | periodic"},
      {"meanfield.controller", "zero", "binary controller tabulated for the mean-field control"},
      {"meanfield.model_file", "", "trained network for nn controllers"},
      {"meanfield.f0", null, "initial law as kinetic.initial (null: bimodal mixture)"},

      {"oracle.p", J::array({0.5, 1.0, 2.0}), "constant kernels of the Riccati oracle grid"},
      {"oracle.gamma", J::array({0.5, 1.0, 2.0}), "penalties of the Riccati oracle grid"},
      {"oracle.dt", J::array({1e-2, 1e-3, 1e-4}), "time-steps of the Riccati oracle grid"},
      {"oracle.tol", 1e-3, "max-norm error allowed at the smallest dt"},
      {"oracle.brute_force", true, "also compare DSDRE with a direct finite-horizon minimization"},
      {"oracle.bf_p", 1.0, "constant kernel of the brute-force problem"},
      {"oracle.bf_gamma", 0.05, "penalty of the brute-force problem"},
      {"oracle.bf_z0", J::array({1.0, -0.5}), "initial pair (v, v*) of the brute-force problem"},
      {"oracle.bf_steps", 200, "horizon of the brute-force problem"},
      {"oracle.bf_dt", 0.01, "time-step of the brute-force problem"},
      {"oracle.bf_tol", 0.01, "relative cost gap allowed between DSDRE and the direct minimum"},

      {"bench.batch_sizes", J::array({100, 1000, 10000}), "particle counts"},
      {"bench.d_values", J::array({15}), "agent dimensions"},
      {"bench.controllers", J::array({"zero", "nn_control", "nn_state_update", "exact_dsdre"}), "controllers"},
      {"bench.control_preset", "test2-u-fnn", "architecture of the control network"},
      {"bench.state_preset", "test2-s-fnn", "architecture of the state-update network"},
      {"bench.control_model_file", "", "trained control network (used when its size matches)"},
      {"bench.state_model_file", "", "trained state-update network (used when its size matches)"},
      {"bench.n_steps", 100, "steps per timed run"},
      {"bench.exact_steps", 10, "steps per timed run of exact_dsdre"},
      {"bench.repetitions", 5, "timed repetitions per cell"},
      {"bench.exact_repetitions", 1, "timed repetitions of exact_dsdre cells"},
      {"bench.warm_up", true, "discard one untimed run first (not for exact_dsdre)"},
      {"bench.time_budget_seconds", 600.0, "runs longer than this are censored"},
      {"bench.dt", 0.05, "time-step (epsilon = dt)"},
      {"bench.seed", 1, "seed"},
  };
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    parts.emplace_back(path.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

bool is_leaf(const std::string& path) {
  for (const ConfigKey& k : config_keys()) {
    if (k.path == path) return true;
  }
  return false;
}

bool is_section(const std::string& path) {
  for (const ConfigKey& k : config_keys()) {
    if (k.path.size() > path.size() && k.path.compare(0, path.size(), path) == 0 && k.path[path.size()] == '.') {
      return true;
    }
  }
  return false;
}

void merge_at(Json& base, const Json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (is_leaf(path)) {
      base[key] = value;
    } else if (is_section(path)) {
      merge_at(base[key], value, path);
    } else {
      throw ConfigError("unknown config key '" + path + "'");
    }
  }
}

// --- typed access ----------------------------------------------------------

template <class T>
T as(const Json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + what + "' has the wrong type: " + j.dump());
  }
}

const Json& at(const Json& j, const std::string& path) {
  const Json* cur = &j;
  for (const std::string& p : split_path(path)) {
    if (!cur->is_object() || !cur->contains(p)) throw ConfigError("missing config key '" + path + "'");
    cur = &(*cur)[p];
  }
  return *cur;
}

template <class T>
T get(const Json& j, const std::string& path) {
  return as<T>(at(j, path), path);
}

template <class T>
std::optional<T> get_opt(const Json& j, const std::string& key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return as<T>(j[key], key);
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = v[i];
  return out;
}

std::vector<double> from_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector box_from_json(const Json& j, int n, const std::string& what) {
  if (j.is_number()) return Vector::Constant(n, j.get<double>());
  const Vector v = to_vector(as<std::vector<double>>(j, what));
  if (v.size() != n) throw ConfigError(what + " needs " + std::to_string(n) + " entries");
  return v;
}

ModelSpec default_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::Sznajd: return make_sznajd();
    case ModelKind::CuckerSmale: return make_cucker_smale();
    case ModelKind::QuasiMorse: return make_quasi_morse();
    case ModelKind::ConstantKernel: return make_constant_kernel(1.0, 1.0);
  }
  throw ConfigError("unknown model kind");
}

template <class F>
auto convert(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

DareOptions dare_from_json(const Json& j) {
  DareOptions o;
  o.tol = get<double>(j, "dare.tol");
  o.max_iter = get<int>(j, "dare.max_iter");
  const auto method = get<std::string>(j, "dare.method");
  if (method == "doubling") {
    o.method = DareMethod::Doubling;
  } else if (method == "fixed_point") {
    o.method = DareMethod::FixedPoint;
  } else {
    throw ConfigError("dare.method must be doubling or fixed_point");
  }
  if (!(o.tol > 0.0) || o.max_iter < 1) throw ConfigError("dare.tol must be > 0 and dare.max_iter >= 1");
  return o;
}

InitialDistribution initial_or_default(const Json& j, const ModelSpec& spec, const std::string& what) {
  if (j.is_null()) return spec.kind == ModelKind::CuckerSmale ? uniform_box(spec) : default_bimodal(spec);
  return convert(what, [&] { return distribution_from_json(j); });
}

Json test_preset(int which) {
  Json j = Json::object();
  switch (which) {
    case 1:
      j["model"] = {{"kind", "sznajd"}, {"d", 1}, {"gamma", 0.05}, {"beta", -1.0}};
      j["dataset"] = {{"dt_range", {0.01, 0.01}}};
      j["training"] = {{"preset", "test1-u-fnn"}};
      j["kinetic"] = {{"dt", 0.01}, {"epsilon", 0.01}, {"n_steps", 100}};
      j["meanfield"] = {{"M", 400}, {"dt", 0.01}, {"n_steps", 100}};
      j["bench"] = {{"d_values", {1}}, {"control_preset", "test1-u-fnn"}, {"state_preset", "test1-s-fnn"},
                    {"dt", 0.01}};
      break;
    case 2:
      j["model"] = {{"kind", "cucker_smale"}, {"d", 15}, {"gamma", 0.01}};
      j["dataset"] = {{"dt_range", {0.001, 1.0}}};
      j["training"] = {{"preset", "test2-u-fnn"}};
      j["kinetic"] = {{"dt", 0.05}, {"epsilon", 0.05}, {"n_steps", 100}};
      j["bench"] = {{"d_values", {15}}, {"control_preset", "test2-u-fnn"}, {"state_preset", "test2-s-fnn"},
                    {"dt", 0.05}};
      break;
    case 3:
      j["model"] = {{"kind", "quasi_morse"}, {"d", 3}, {"gamma", 0.01}, {"C", 0.6}, {"p", 1.5},
                    {"l", 0.5}, {"alpha", 2.0}, {"beta", 1.5}};
      j["dataset"] = {{"dt_range", {0.001, 1.0}}};
      j["training"] = {{"preset", "test3-u-fnn"}};
      j["kinetic"] = {{"dt", 0.05}, {"epsilon", 0.05}, {"n_steps", 100}};
      j["bench"] = {{"d_values", {3}}, {"control_preset", "test3-u-fnn"}, {"state_preset", "test3-s-fnn"},
                    {"dt", 0.05}};
      break;
  }
  return j;
}

}  // namespace

// --- model and distribution JSON -------------------------------------------

Json model_spec_to_json(const ModelSpec& spec) {
  Json j = Json::object();
  j["kind"] = to_string(spec.kind);
  j["d"] = spec.d;
  j["order"] = spec.order == Order::First ? "first" : "second";
  j["gamma"] = spec.gamma;
  j["target"] = to_string(spec.target);
  j["beta"] = spec.params.beta;
  j["C"] = spec.params.C;
  j["p"] = spec.params.p;
  j["l"] = spec.params.l;
  j["alpha"] = spec.params.alpha;
  j["kernel"] = spec.params.kernel;
  j["domain_lo"] = from_vector(spec.domain_lo);
  j["domain_hi"] = from_vector(spec.domain_hi);
  return j;
}

ModelSpec model_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("model must be an object");
  const std::string kind = get_opt<std::string>(j, "kind").value_or("cucker_smale");
  ModelSpec spec = convert("model.kind", [&] { return default_for(model_kind_from_string(kind)); });
  const ModelSpec base = spec;
  if (auto d = get_opt<int>(j, "d")) spec.d = *d;
  if (spec.d < 1) throw ConfigError("model.d must be >= 1");
  if (auto g = get_opt<double>(j, "gamma")) spec.gamma = *g;
  if (auto t = get_opt<std::string>(j, "target")) spec.target = convert("model.target", [&] { return target_from_string(*t); });
  if (auto v = get_opt<double>(j, "beta")) spec.params.beta = *v;
  if (auto v = get_opt<double>(j, "C")) spec.params.C = *v;
  if (auto v = get_opt<double>(j, "p")) spec.params.p = *v;
  if (auto v = get_opt<double>(j, "l")) spec.params.l = *v;
  if (auto v = get_opt<double>(j, "alpha")) spec.params.alpha = *v;
  if (auto v = get_opt<double>(j, "kernel")) spec.params.kernel = *v;
  const int n = spec.agent_dim();
  spec.domain_lo = j.contains("domain_lo") && !j["domain_lo"].is_null()
                       ? box_from_json(j["domain_lo"], n, "model.domain_lo")
                       : Vector::Constant(n, base.domain_lo(0));
  spec.domain_hi = j.contains("domain_hi") && !j["domain_hi"].is_null()
                       ? box_from_json(j["domain_hi"], n, "model.domain_hi")
                       : Vector::Constant(n, base.domain_hi(0));
  convert("model", [&] {
    validate(spec);
    return 0;
  });
  return spec;
}

Json distribution_to_json(const InitialDistribution& d) {
  Json j = Json::object();
  j["kind"] = to_string(d.kind);
  if (d.lo.size() > 0) j["lo"] = from_vector(d.lo);
  if (d.hi.size() > 0) j["hi"] = from_vector(d.hi);
  if (d.mean.size() > 0) j["mean"] = from_vector(d.mean);
  if (d.kind == InitialDistribution::Kind::Gaussian) j["sigma"] = d.sigma;
  if (!d.weights.empty()) {
    j["weights"] = d.weights;
    j["means"] = d.means;
    j["sigmas"] = d.sigmas;
  }
  return j;
}

InitialDistribution distribution_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("initial distribution must be an object");
  static const std::vector<std::string> allowed{"kind", "lo", "hi", "mean", "sigma", "weights", "means", "sigmas"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown initial distribution key '" + key + "'");
    }
  }
  InitialDistribution d;
  d.kind = convert("distribution kind",
                   [&] { return distribution_kind_from_string(get_opt<std::string>(j, "kind").value_or("")); });
  if (auto v = get_opt<std::vector<double>>(j, "lo")) d.lo = to_vector(*v);
  if (auto v = get_opt<std::vector<double>>(j, "hi")) d.hi = to_vector(*v);
  if (auto v = get_opt<std::vector<double>>(j, "mean")) d.mean = to_vector(*v);
  if (auto v = get_opt<double>(j, "sigma")) d.sigma = *v;
  if (auto v = get_opt<std::vector<double>>(j, "weights")) d.weights = *v;
  if (auto v = get_opt<std::vector<double>>(j, "means")) d.means = *v;
  if (auto v = get_opt<std::vector<double>>(j, "sigmas")) d.sigmas = *v;
  convert("initial distribution", [&] {
    validate(d);
    return 0;
  });
  return d;
}

// --- run configuration -----------------------------------------------------

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

Json default_config_json() {
  Json j = Json::object();
  for (const ConfigKey& k : config_keys()) {
    Json* cur = &j;
    for (const std::string& p : split_path(k.path)) cur = &(*cur)[p];
    *cur = k.default_value;
  }
  return j;
}

std::vector<std::string> config_preset_names() { return {"test1", "test2", "test3"}; }

Json preset_overlay(std::string_view name) {
  if (name == "test1") return test_preset(1);
  if (name == "test2") return test_preset(2);
  if (name == "test3") return test_preset(3);
  throw ConfigError("unknown preset '" + std::string(name) + "' (test1, test2, test3)");
}

void merge_checked(Json& base, const Json& patch) { merge_at(base, patch, ""); }

void apply_override(Json& config, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  if (!is_leaf(path)) throw ConfigError("unknown config key '" + path + "'");
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json patch = value;
  const auto parts = split_path(path);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
  merge_checked(config, patch);
}

std::filesystem::path RunConfig::output(const std::string& name) const {
  return std::filesystem::path(output_dir) / name;
}

RunConfig parse_run_config(const Json& j) {
  RunConfig rc;
  rc.echo = j;
  rc.output_dir = get<std::string>(j, "output_dir");
  if (rc.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  rc.model = model_spec_from_json(at(j, "model"));
  rc.dare = dare_from_json(j);

  // dataset
  DatasetConfig& dc = rc.dataset.cfg;
  const auto n = get<long long>(j, "dataset.n_samples");
  if (n < 1) throw ConfigError("dataset.n_samples must be >= 1");
  dc.n_samples = static_cast<std::size_t>(n);
  const auto range = get<std::vector<double>>(j, "dataset.dt_range");
  if (range.size() != 2 || !(range[0] > 0.0) || range[1] < range[0]) {
    throw ConfigError("dataset.dt_range must be [lo, hi] with 0 < lo <= hi");
  }
  dc.dt_lo = range[0];
  dc.dt_hi = range[1];
  dc.seed = get<std::uint64_t>(j, "dataset.seed");
  dc.train_fraction = get<double>(j, "dataset.train_fraction");
  if (!(dc.train_fraction > 0.0 && dc.train_fraction < 1.0)) throw ConfigError("dataset.train_fraction must be in (0, 1)");
  const auto rule = get<std::string>(j, "dataset.update_rule");
  if (rule == "discrete") {
    dc.rule = UpdateRule::Discrete;
  } else if (rule == "literal") {
    dc.rule = UpdateRule::LiteralAlgorithm;
  } else {
    throw ConfigError("dataset.update_rule must be discrete or literal");
  }
  dc.max_attempts_per_sample = get<int>(j, "dataset.max_attempts_per_sample");
  if (dc.max_attempts_per_sample < 1) throw ConfigError("dataset.max_attempts_per_sample must be >= 1");
  dc.dare = rc.dare;
  rc.dataset.csv = get<std::string>(j, "dataset.csv");
  rc.dataset.metadata = get<std::string>(j, "dataset.metadata");

  // training
  TrainingSection& ts = rc.training;
  const Json& preset = at(j, "training.preset");
  ts.preset = preset.is_null() ? "" : as<std::string>(preset, "training.preset");
  if (!ts.preset.empty()) convert("training.preset", [&] { return preset_architecture(ts.preset, 2, 1); });
  ts.hidden = get<std::vector<int>>(j, "training.hidden");
  ts.activation = convert("training.activation",
                          [&] { return activation_from_string(get<std::string>(j, "training.activation")); });
  ts.recurrent_activation = convert("training.recurrent_activation", [&] {
    return activation_from_string(get<std::string>(j, "training.recurrent_activation"));
  });
  ts.layer = convert("training.layer", [&] { return layer_kind_from_string(get<std::string>(j, "training.layer")); });
  const auto target = get<std::string>(j, "training.target");
  if (target == "control") {
    ts.target = SurrogateKind::Control;
  } else if (target == "state_update") {
    ts.target = SurrogateKind::StateUpdate;
  } else {
    throw ConfigError("training.target must be control or state_update");
  }
  ts.dataset = get<std::string>(j, "training.dataset");
  ts.model = get<std::string>(j, "training.model");
  TrainConfig& tc = ts.cfg;
  tc.learning_rate = get<double>(j, "training.learning_rate");
  tc.batch_size = get<int>(j, "training.batch_size");
  tc.epochs = get<int>(j, "training.epochs");
  tc.adam_beta1 = get<double>(j, "training.adam_beta1");
  tc.adam_beta2 = get<double>(j, "training.adam_beta2");
  tc.adam_eps = get<double>(j, "training.adam_eps");
  tc.seed = get<std::uint64_t>(j, "training.seed");
  tc.early_stop_patience = get<int>(j, "training.early_stop_patience");
  convert("training", [&] {
    validate(tc);
    return 0;
  });
  ts.tune_grid = get<std::string>(j, "training.tune_grid");
  if (ts.tune_grid != "default" && ts.tune_grid != "presets") throw ConfigError("training.tune_grid must be default or presets");

  // kinetic
  KineticConfig& kc = rc.kinetic;
  kc.model = rc.model;
  kc.controller = convert("kinetic.controller",
                          [&] { return controller_kind_from_string(get<std::string>(j, "kinetic.controller")); });
  kc.model_file = get<std::string>(j, "kinetic.model_file");
  kc.n_particles = get<Index>(j, "kinetic.n_particles");
  kc.dt = get<double>(j, "kinetic.dt");
  kc.epsilon = get<double>(j, "kinetic.epsilon");
  kc.n_steps = get<int>(j, "kinetic.n_steps");
  kc.scheme = convert("kinetic.scheme", [&] { return scheme_from_string(get<std::string>(j, "kinetic.scheme")); });
  kc.seed = get<std::uint64_t>(j, "kinetic.seed");
  kc.snapshot_every = get<int>(j, "kinetic.snapshot_every");
  kc.initial = initial_or_default(at(j, "kinetic.initial"), rc.model, "kinetic.initial");
  kc.dare = rc.dare;
  convert("kinetic", [&] {
    validate(kc);
    return 0;
  });

  // meanfield
  MeanFieldSection& ms = rc.meanfield;
  ms.cfg.model = rc.model;
  ms.cfg.M = get<int>(j, "meanfield.M");
  ms.cfg.dt = get<double>(j, "meanfield.dt");
  ms.cfg.n_steps = get<int>(j, "meanfield.n_steps");
  const auto boundary = get<std::string>(j, "meanfield.boundary");
  if (boundary == "clamp") {
    ms.cfg.boundary = Boundary::Clamp;
  } else if (boundary == "periodic") {
    ms.cfg.boundary = Boundary::Periodic;
  } else {
    throw ConfigError("meanfield.boundary must be clamp or periodic");
  }
  ms.controller = convert("meanfield.controller",
                          [&] { return controller_kind_from_string(get<std::string>(j, "meanfield.controller")); });
  ms.model_file = get<std::string>(j, "meanfield.model_file");
  const Json& f0 = at(j, "meanfield.f0");
  if (!f0.is_null()) ms.cfg.f0 = convert("meanfield.f0", [&] { return distribution_from_json(f0); });
  if (ms.cfg.M < 2 || !(ms.cfg.dt > 0.0) || ms.cfg.n_steps < 0) {
    throw ConfigError("meanfield needs M >= 2, dt > 0, n_steps >= 0");
  }

  // oracle
  OracleSection& os = rc.oracle;
  os.p = get<std::vector<double>>(j, "oracle.p");
  os.gamma = get<std::vector<double>>(j, "oracle.gamma");
  os.dt = get<std::vector<double>>(j, "oracle.dt");
  os.tol = get<double>(j, "oracle.tol");
  os.brute_force = get<bool>(j, "oracle.brute_force");
  os.bf_p = get<double>(j, "oracle.bf_p");
  os.bf_gamma = get<double>(j, "oracle.bf_gamma");
  os.bf_z0 = get<std::vector<double>>(j, "oracle.bf_z0");
  if (os.bf_z0.size() != 2 || !(os.bf_p > 0.0) || !(os.bf_gamma > 0.0)) {
    throw ConfigError("oracle.bf_z0 needs two entries and bf_p, bf_gamma must be > 0");
  }
  os.bf_steps = get<int>(j, "oracle.bf_steps");
  os.bf_dt = get<double>(j, "oracle.bf_dt");
  os.bf_tol = get<double>(j, "oracle.bf_tol");
  if (os.p.empty() || os.gamma.empty() || os.dt.empty()) throw ConfigError("oracle grids must not be empty");
  for (double v : os.p) {
    if (!(v > 0.0)) throw ConfigError("oracle.p entries must be > 0");
  }
  for (double v : os.gamma) {
    if (!(v > 0.0)) throw ConfigError("oracle.gamma entries must be > 0");
  }
  for (double v : os.dt) {
    if (!(v > 0.0)) throw ConfigError("oracle.dt entries must be > 0");
  }
  if (!(os.tol > 0.0) || os.bf_steps < 1 || !(os.bf_dt > 0.0) || !(os.bf_tol > 0.0)) {
    throw ConfigError("oracle tolerances, bf_steps and bf_dt must be positive");
  }

  // bench
  BenchConfig& bc = rc.bench;
  bc.base = rc.model;
  bc.batch_sizes = get<std::vector<Index>>(j, "bench.batch_sizes");
  bc.d_values = get<std::vector<int>>(j, "bench.d_values");
  bc.controllers = get<std::vector<std::string>>(j, "bench.controllers");
  for (const std::string& c : bc.controllers) convert("bench.controllers", [&] { return controller_kind_from_string(c); });
  bc.control_preset = get<std::string>(j, "bench.control_preset");
  bc.state_preset = get<std::string>(j, "bench.state_preset");
  bc.control_model_file = get<std::string>(j, "bench.control_model_file");
  bc.state_model_file = get<std::string>(j, "bench.state_model_file");
  bc.n_steps = get<int>(j, "bench.n_steps");
  bc.exact_steps = get<int>(j, "bench.exact_steps");
  bc.repetitions = get<int>(j, "bench.repetitions");
  bc.exact_repetitions = get<int>(j, "bench.exact_repetitions");
  bc.warm_up = get<bool>(j, "bench.warm_up");
  bc.time_budget_seconds = get<double>(j, "bench.time_budget_seconds");
  bc.dt = get<double>(j, "bench.dt");
  bc.seed = get<std::uint64_t>(j, "bench.seed");
  if (bc.batch_sizes.empty() || bc.d_values.empty() || bc.controllers.empty() || bc.n_steps < 1 ||
      bc.exact_steps < 1 || bc.repetitions < 1 || bc.exact_repetitions < 1 || !(bc.dt > 0.0) ||
      !(bc.time_budget_seconds > 0.0)) {
    throw ConfigError("bench needs non-empty lists and positive counts, dt and budget");
  }
  for (Index b : bc.batch_sizes) {
    if (b < 2) throw ConfigError("bench.batch_sizes entries must be >= 2");
  }
  for (int d : bc.d_values) {
    if (d < 1) throw ConfigError("bench.d_values entries must be >= 1");
  }
  return rc;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::string& preset,
                          const std::vector<std::string>& overrides) {
  Json config = default_config_json();
  Json from_file = Json::object();
  if (file) {
    std::ifstream is(*file);
    if (!is) throw ConfigError("cannot open config file " + file->string());
    from_file = Json::parse(is, nullptr, false, true);
    if (from_file.is_discarded() || !from_file.is_object()) {
      throw ConfigError("config file " + file->string() + " is not a JSON object");
    }
  }
  std::string chosen = preset;
  if (chosen.empty() && from_file.contains("preset") && !from_file["preset"].is_null()) {
    chosen = as<std::string>(from_file["preset"], "preset");
  }
  if (!chosen.empty()) {
    merge_checked(config, preset_overlay(chosen));
    config["preset"] = chosen;
  }
  merge_checked(config, from_file);
  if (!chosen.empty()) config["preset"] = chosen;
  for (const std::string& o : overrides) apply_override(config, o);
  if (const char* env = std::getenv("KF_OUTPUT_DIR"); env != nullptr && *env != '\0') config["output_dir"] = env;
  return parse_run_config(config);
}

std::string config_help() {
  std::ostringstream os;
  os << "Configuration keys (JSON file via --config, overrides as key=value):\n";
  for (const ConfigKey& k : config_keys()) {
    os << "  " << k.path << " = " << k.default_value.dump() << "\n      " << k.doc << '\n';
  }
  os << "Presets: test1 (Sznajd), test2 (Cucker-Smale, d = 15), test3 (quasi-Morse).\n";
  os << "Environment: KF_OUTPUT_DIR replaces output_dir.\n";
  return os.str();
}

}  // namespace kf
