#include "kf/error.hpp"
#include "kf/neural.hpp"

namespace kf {
namespace {

using A = Activation;

// Leading LSTM cell followed by dense layers.
Architecture lstm_then_dense(int in, int out, int width, A cell_act, A rho, int n_dense, A dense_act) {
  Architecture a = make_lstm(in, {width}, out, cell_act, rho);
  for (int k = 0; k < n_dense; ++k) {
    a.layer_sizes.insert(a.layer_sizes.end() - 1, width);
    a.layer_kinds.insert(a.layer_kinds.end() - 1, LayerKind::Dense);
    a.activations.insert(a.activations.end() - 1, dense_act);
    a.recurrent_activations.insert(a.recurrent_activations.end() - 1, A::Sigmoid);
  }
  validate(a);
  return a;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"test1-u-fnn", "test1-u-rnn", "test1-s-fnn", "test1-s-rnn", "test2-u-fnn", "test2-u-rnn",
          "test2-s-fnn", "test2-s-rnn", "test3-u-fnn", "test3-u-rnn", "test3-s-fnn", "test3-s-rnn"};
}

Architecture preset_architecture(std::string_view name, int in, int out) {
  if (name == "test1-u-fnn") return make_fnn(in, {100}, out, A::Softplus);
  if (name == "test1-u-rnn") return make_lstm(in, {100}, out, A::Tanh, A::Sigmoid);
  if (name == "test1-s-fnn") return make_fnn(in, {60, 60}, out, A::Tanh);
  if (name == "test1-s-rnn") return make_lstm(in, {100}, out, A::Tanh, A::Softplus);
  if (name == "test2-u-fnn") return make_fnn(in, {100}, out, A::Softplus);
  if (name == "test2-u-rnn") return make_lstm(in, {100}, out, A::ReLU, A::Sigmoid);
  if (name == "test2-s-fnn") return make_fnn(in, {100, 100, 100}, out, A::ReLU);
  if (name == "test2-s-rnn") return make_lstm(in, {100}, out, A::ReLU, A::Sigmoid);
  if (name == "test3-u-fnn") return make_fnn(in, {100, 100, 100}, out, A::Softplus);
  if (name == "test3-u-rnn") return lstm_then_dense(in, out, 100, A::Softplus, A::Softplus, 4, A::Softplus);
  if (name == "test3-s-fnn") return make_fnn(in, {100, 100, 100, 100}, out, A::Softplus);
  if (name == "test3-s-rnn") return lstm_then_dense(in, out, 100, A::Softplus, A::Softplus, 2, A::Elu);
  throw InvalidParameter("unknown architecture preset '" + std::string(name) + "'");
}

std::vector<Architecture> default_tuning_grid(int in, int out) {
  std::vector<Architecture> grid;
  for (A act : {A::Softplus, A::Tanh, A::ReLU}) {
    for (int depth : {1, 2, 3}) {
      for (int width : {25, 50, 100}) grid.push_back(make_fnn(in, std::vector<int>(depth, width), out, act));
    }
  }
  return grid;
}

}  // namespace kf
