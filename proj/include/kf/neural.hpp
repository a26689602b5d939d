#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kf/types.hpp"

namespace kf {

enum class Activation { Identity, Tanh, ReLU, Softplus, Elu, Sigmoid };
enum class LayerKind { Dense, LstmCell };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);
std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(std::string_view name);

double activate(Activation a, double z);
/// Derivative with respect to the pre-activation z.
double activate_prime(Activation a, double z);

/// layer_sizes = [n_0, ..., n_K]; transition k maps n_k -> n_{k+1} with
/// layer_kinds[k] and output activation activations[k + 1].
/// activations[0] and activations[K] are Identity. recurrent_activations[k]
/// is the gate activation of an LstmCell transition (ignored for Dense).
struct Architecture {
  std::vector<int> layer_sizes;
  std::vector<LayerKind> layer_kinds;
  std::vector<Activation> activations;
  std::vector<Activation> recurrent_activations;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int n_transitions() const { return static_cast<int>(layer_sizes.size()) - 1; }
  std::string describe() const;
};

void validate(const Architecture& arch);

/// Fully connected net: hidden widths, one activation for every hidden layer.
Architecture make_fnn(int in, const std::vector<int>& hidden, int out, Activation act);
/// Hidden layers as one-to-one LSTM cells, Dense output layer.
Architecture make_lstm(int in, const std::vector<int>& hidden, int out, Activation act,
                       Activation recurrent = Activation::Sigmoid);

/// Dense layers own one (W, b); LstmCell layers own (W_i, W_c, W_o) and
/// (b_i, b_c, b_o) in that order.
struct LayerParams {
  std::vector<Matrix> W;
  std::vector<Vector> b;
};

struct NetworkParams {
  Architecture arch;
  std::vector<LayerParams> layers;
  // normalized input = (x - input_shift) .* input_scale
  Vector input_scale;
  Vector input_shift;
  // y = net .* output_scale + output_shift
  Vector output_scale;
  Vector output_shift;

  std::size_t n_parameters() const;
};

/// Zero weights, unit scaling.
NetworkParams zero_params(const Architecture& arch);
/// Glorot-uniform weights, zero biases, unit scaling.
NetworkParams glorot_init(const Architecture& arch, std::uint64_t seed);
void validate(const NetworkParams& params);

Vector fnn_forward(const NetworkParams& params, const Eigen::Ref<const Vector>& x);
/// One LstmCell: i = rho(W_i x + b_i), c~ = sigma(W_c x + b_c), c = i .* c~,
/// o = rho(W_o x + b_o), h = o .* sigma(c).
Vector lstm_forward(const LayerParams& cell, Activation sigma, Activation rho, const Eigen::Ref<const Vector>& x);
/// Row i of the result is the forward pass of row i of X.
RowMatrix batch_evaluate(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X);

// --- training ------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 100;
  int epochs = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  int early_stop_patience = 20;
};

void validate(const TrainConfig& cfg);

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch, normalized-output MSE
  std::vector<double> val_loss;
  int best_epoch = -1;             // -1: the initial parameters were never beaten
  double initial_val_loss = 0.0;
};

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
};

/// Sets output_shift/output_scale to the per-column mean/std of Y.
void fit_output_scaling(NetworkParams& params, const Eigen::Ref<const RowMatrix>& Y);
/// Affine map of [lo, hi] to [-1, 1] per input column.
void set_input_box(NetworkParams& params, const Vector& lo, const Vector& hi);

/// Mean over rows and columns of the squared error, in normalized output units.
double normalized_mse(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X,
                      const Eigen::Ref<const RowMatrix>& Y);
/// Same in original units.
double mse(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X, const Eigen::Ref<const RowMatrix>& Y);

/// Gradient of normalized_mse over (X, Y) with respect to every layer
/// parameter, laid out like params.layers. Writes the loss itself to *loss
/// when given.
std::vector<LayerParams> loss_gradient(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X,
                                       const Eigen::Ref<const RowMatrix>& Y, double* loss = nullptr);

/// Adam on minibatches of the normalized-output MSE starting from `init`,
/// whose scaling vectors are kept. Returns the parameters with the best
/// validation loss seen, including the initial ones.
TrainResult train_from(NetworkParams init, const Eigen::Ref<const RowMatrix>& X_train,
                       const Eigen::Ref<const RowMatrix>& Y_train, const Eigen::Ref<const RowMatrix>& X_val,
                       const Eigen::Ref<const RowMatrix>& Y_val, const TrainConfig& cfg);

/// Glorot init, output standardization from Y_train, input box from the
/// column ranges of X_train unless input_lo/input_hi are given, then train_from.
TrainResult train(const Architecture& arch, const Eigen::Ref<const RowMatrix>& X_train,
                  const Eigen::Ref<const RowMatrix>& Y_train, const Eigen::Ref<const RowMatrix>& X_val,
                  const Eigen::Ref<const RowMatrix>& Y_val, const TrainConfig& cfg, const Vector& input_lo = {},
                  const Vector& input_hi = {});

// --- evaluation and tuning ----------------------------------------------

struct FitReport {
  double mse = 0.0;
  double rmse = 0.0;
  double relative_rmse = 0.0;  // sqrt(sum |y - yhat|^2 / sum |y|^2)
  double mre = 0.0;            // mean over rows of |y - yhat| / |y|, rows with |y| = 0 skipped
  double r2 = 0.0;             // 1 - SSE / SST pooled over all components
};

FitReport fit_report(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X,
                     const Eigen::Ref<const RowMatrix>& Y);

struct TuneEntry {
  Architecture arch;
  double val_relative_rmse = 0.0;
  std::size_t n_parameters = 0;
  bool failed = false;
  std::string error;
};

struct TuneResult {
  Architecture best;
  NetworkParams best_params;
  std::vector<TuneEntry> report;
};

/// Trains every candidate and keeps the lowest validation relative RMSE;
/// ties go to fewer parameters, then to the earlier candidate. A failing
/// candidate is recorded and skipped. Throws Error if every candidate fails.
TuneResult tune(const std::vector<Architecture>& candidates, const Eigen::Ref<const RowMatrix>& X_train,
                const Eigen::Ref<const RowMatrix>& Y_train, const Eigen::Ref<const RowMatrix>& X_val,
                const Eigen::Ref<const RowMatrix>& Y_val, const TrainConfig& cfg, const Vector& input_lo = {},
                const Vector& input_hi = {});

// --- model files ---------------------------------------------------------

/// What a network predicts.
enum class SurrogateKind { Control, StateUpdate };

struct SurrogateModel {
  SurrogateKind kind = SurrogateKind::Control;
  NetworkParams params;
};

void save_model(std::ostream& os, const SurrogateModel& model);
void save_model(const std::filesystem::path& path, const SurrogateModel& model);
SurrogateModel load_model(std::istream& is);
SurrogateModel load_model(const std::filesystem::path& path);

// --- presets -------------------------------------------------------------

/// Named architectures, e.g. "test2-u-fnn" (1 x 100 Softplus). in/out are
/// the input and output widths of the target problem.
Architecture preset_architecture(std::string_view name, int in, int out);
std::vector<std::string> preset_names();
/// Default tuning grid: FNN depths {1, 2, 3} x widths {25, 50, 100} x {Softplus, Tanh, ReLU}.
std::vector<Architecture> default_tuning_grid(int in, int out);

}  // namespace kf
