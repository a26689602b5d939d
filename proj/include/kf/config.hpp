#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kf/diagnostics.hpp"
#include "kf/kinetic.hpp"
#include "kf/meanfield1d.hpp"
#include "kf/models.hpp"
#include "kf/neural.hpp"
#include "kf/sdre.hpp"

namespace kf {

using Json = nlohmann::ordered_json;

Json model_spec_to_json(const ModelSpec& spec);
/// Starts from the defaults of `kind` and applies the keys present; null
/// entries keep the default. domain_lo/hi may be a number or one per coordinate.
ModelSpec model_spec_from_json(const Json& j);

Json distribution_to_json(const InitialDistribution& dist);
InitialDistribution distribution_from_json(const Json& j);

struct DatasetSection {
  DatasetConfig cfg;
  std::string csv = "dataset.csv";
  std::string metadata = "dataset.meta.json";
};

struct TrainingSection {
  TrainConfig cfg;
  std::string preset;  // empty: use hidden/activation/layer
  std::vector<int> hidden{100};
  Activation activation = Activation::Softplus;
  LayerKind layer = LayerKind::Dense;
  Activation recurrent_activation = Activation::Sigmoid;
  SurrogateKind target = SurrogateKind::Control;
  std::string dataset;  // empty: <output_dir>/<dataset.csv>
  std::string model = "model.kfnn";
  std::string tune_grid = "default";  // default | presets
};

struct MeanFieldSection {
  MeanFieldConfig cfg;
  ControllerKind controller = ControllerKind::Zero;
  std::string model_file;
};

struct OracleSection {
  std::vector<double> p{0.5, 1.0, 2.0};
  std::vector<double> gamma{0.5, 1.0, 2.0};
  std::vector<double> dt{1e-2, 1e-3, 1e-4};
  double tol = 1e-3;
  bool brute_force = true;
  double bf_p = 1.0;
  double bf_gamma = 0.05;
  std::vector<double> bf_z0{1.0, -0.5};
  int bf_steps = 200;
  double bf_dt = 0.01;
  double bf_tol = 0.01;
};

struct RunConfig {
  ModelSpec model;
  DareOptions dare;
  DatasetSection dataset;
  TrainingSection training;
  KineticConfig kinetic;
  MeanFieldSection meanfield;
  OracleSection oracle;
  BenchConfig bench;
  std::string output_dir = "out";
  Json echo;  // the merged configuration this struct was built from

  std::filesystem::path output(const std::string& name) const;
};

/// A documented configuration key with its default.
struct ConfigKey {
  std::string path;  // dotted
  Json default_value;
  std::string doc;
};

const std::vector<ConfigKey>& config_keys();
Json default_config_json();
/// Parameter overlays test1, test2, test3.
Json preset_overlay(std::string_view name);
std::vector<std::string> config_preset_names();

/// Merges patch into base; keys absent from the documented set are ConfigError.
void merge_checked(Json& base, const Json& patch);
/// `a.b.c=value`; value parsed as JSON, falling back to a plain string.
void apply_override(Json& config, std::string_view assignment);

/// Converts and validates; any problem is a ConfigError.
RunConfig parse_run_config(const Json& config);

/// defaults <- preset (argument, else the file's "preset") <- file <- overrides,
/// then KF_OUTPUT_DIR replaces output_dir when set.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::string& preset,
                          const std::vector<std::string>& overrides);

/// One line per key: path, default and meaning.
std::string config_help();

}  // namespace kf
