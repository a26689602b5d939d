#include <cmath>
#include <sstream>

#include "kf/error.hpp"
#include "kf/neural.hpp"
#include "kf/rng.hpp"

namespace kf {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
    case Activation::Softplus: return "softplus";
    case Activation::Elu: return "elu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::ReLU;
  if (name == "softplus") return Activation::Softplus;
  if (name == "elu") return Activation::Elu;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw InvalidParameter("unknown activation '" + std::string(name) + "'");
}

std::string to_string(LayerKind k) { return k == LayerKind::Dense ? "dense" : "lstm"; }

LayerKind layer_kind_from_string(std::string_view name) {
  if (name == "dense") return LayerKind::Dense;
  if (name == "lstm") return LayerKind::LstmCell;
  throw InvalidParameter("unknown layer kind '" + std::string(name) + "'");
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Tanh: return std::tanh(z);
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Softplus: return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
    case Activation::Elu: return z > 0.0 ? z : std::expm1(z);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

double activate_prime(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Softplus: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Elu: return z > 0.0 ? 1.0 : std::exp(z);
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

std::string Architecture::describe() const {
  std::ostringstream os;
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    if (k > 0) os << " ";
    os << (layer_kinds[k] == LayerKind::Dense ? "D" : "L") << layer_sizes[k + 1] << ":"
       << to_string(activations[k + 1]);
    if (layer_kinds[k] == LayerKind::LstmCell) os << "/" << to_string(recurrent_activations[k]);
  }
  return os.str();
}

void validate(const Architecture& arch) {
  const std::size_t n = arch.layer_sizes.size();
  if (n < 2) throw InvalidParameter("architecture needs at least input and output sizes");
  if (arch.layer_kinds.size() != n - 1 || arch.recurrent_activations.size() != n - 1) {
    throw InvalidParameter("architecture: layer_kinds/recurrent_activations need one entry per transition");
  }
  if (arch.activations.size() != n) {
    throw InvalidParameter("architecture: activations need one entry per layer size");
  }
  if (arch.layer_sizes.front() < 1 || arch.layer_sizes.back() < 1) {
    throw InvalidParameter("architecture: input and output sizes must be positive");
  }
  for (int s : arch.layer_sizes) {
    if (s < 0) throw InvalidParameter("architecture: negative layer size");
  }
  if (arch.activations.front() != Activation::Identity || arch.activations.back() != Activation::Identity) {
    throw InvalidParameter("architecture: first and last activations must be identity");
  }
  if (arch.layer_kinds.back() != LayerKind::Dense) {
    throw InvalidParameter("architecture: the output layer must be dense");
  }
}

namespace {

Architecture stack(int in, const std::vector<int>& hidden, int out, LayerKind kind, Activation act,
                   Activation recurrent) {
  Architecture a;
  a.layer_sizes.push_back(in);
  a.activations.push_back(Activation::Identity);
  for (int h : hidden) {
    a.layer_sizes.push_back(h);
    a.layer_kinds.push_back(kind);
    a.activations.push_back(act);
    a.recurrent_activations.push_back(recurrent);
  }
  a.layer_sizes.push_back(out);
  a.layer_kinds.push_back(LayerKind::Dense);
  a.activations.push_back(Activation::Identity);
  a.recurrent_activations.push_back(Activation::Sigmoid);
  validate(a);
  return a;
}

int n_blocks(LayerKind k) { return k == LayerKind::Dense ? 1 : 3; }

void apply(Activation a, Matrix& m) { m = m.unaryExpr([a](double z) { return activate(a, z); }); }

}  // namespace

Architecture make_fnn(int in, const std::vector<int>& hidden, int out, Activation act) {
  return stack(in, hidden, out, LayerKind::Dense, act, Activation::Sigmoid);
}

Architecture make_lstm(int in, const std::vector<int>& hidden, int out, Activation act, Activation recurrent) {
  return stack(in, hidden, out, LayerKind::LstmCell, act, recurrent);
}

std::size_t NetworkParams::n_parameters() const {
  std::size_t n = 0;
  for (const LayerParams& l : layers) {
    for (const Matrix& w : l.W) n += static_cast<std::size_t>(w.size());
    for (const Vector& b : l.b) n += static_cast<std::size_t>(b.size());
  }
  return n;
}

NetworkParams zero_params(const Architecture& arch) {
  validate(arch);
  NetworkParams p;
  p.arch = arch;
  for (int k = 0; k < arch.n_transitions(); ++k) {
    LayerParams l;
    const int nin = arch.layer_sizes[k];
    const int nout = arch.layer_sizes[k + 1];
    for (int g = 0; g < n_blocks(arch.layer_kinds[k]); ++g) {
      l.W.push_back(Matrix::Zero(nout, nin));
      l.b.push_back(Vector::Zero(nout));
    }
    p.layers.push_back(std::move(l));
  }
  p.input_scale = Vector::Ones(arch.input_size());
  p.input_shift = Vector::Zero(arch.input_size());
  p.output_scale = Vector::Ones(arch.output_size());
  p.output_shift = Vector::Zero(arch.output_size());
  return p;
}

NetworkParams glorot_init(const Architecture& arch, std::uint64_t seed) {
  NetworkParams p = zero_params(arch);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    for (std::size_t g = 0; g < p.layers[k].W.size(); ++g) {
      Matrix& W = p.layers[k].W[g];
      const double limit = W.size() > 0 ? std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols())) : 0.0;
      CounterRng rng(seed, streams::kInit ^ (k << 8), g);
      for (Index c = 0; c < W.cols(); ++c) {
        for (Index r = 0; r < W.rows(); ++r) W(r, c) = rng.uniform(-limit, limit);
      }
    }
  }
  return p;
}

void validate(const NetworkParams& p) {
  validate(p.arch);
  const Architecture& a = p.arch;
  if (static_cast<int>(p.layers.size()) != a.n_transitions()) {
    throw ShapeMismatch("network: layer count does not match architecture");
  }
  for (int k = 0; k < a.n_transitions(); ++k) {
    const LayerParams& l = p.layers[static_cast<std::size_t>(k)];
    const int blocks = n_blocks(a.layer_kinds[k]);
    if (static_cast<int>(l.W.size()) != blocks || static_cast<int>(l.b.size()) != blocks) {
      throw ShapeMismatch("network: layer " + std::to_string(k) + " has the wrong number of blocks");
    }
    for (int g = 0; g < blocks; ++g) {
      if (l.W[g].rows() != a.layer_sizes[k + 1] || l.W[g].cols() != a.layer_sizes[k] ||
          l.b[g].size() != a.layer_sizes[k + 1]) {
        throw ShapeMismatch("network: layer " + std::to_string(k) + " parameter shape mismatch");
      }
    }
  }
  if (p.input_scale.size() != a.input_size() || p.input_shift.size() != a.input_size() ||
      p.output_scale.size() != a.output_size() || p.output_shift.size() != a.output_size()) {
    throw ShapeMismatch("network: scaling vector size mismatch");
  }
  if ((p.input_scale.array() == 0.0).any() || (p.output_scale.array() == 0.0).any()) {
    throw InvalidParameter("network: scaling components must be nonzero");
  }
}

Vector lstm_forward(const LayerParams& cell, Activation sigma, Activation rho, const Eigen::Ref<const Vector>& x) {
  if (cell.W.size() != 3 || cell.b.size() != 3) throw ShapeMismatch("lstm_forward: expected three gate blocks");
  for (int g = 0; g < 3; ++g) {
    if (cell.W[g].cols() != x.size() || cell.b[g].size() != cell.W[g].rows() ||
        cell.W[g].rows() != cell.W[0].rows()) {
      throw ShapeMismatch("lstm_forward: gate shape mismatch");
    }
  }
  const auto act = [](Activation a, Vector z) { return z.unaryExpr([a](double t) { return activate(a, t); }).eval(); };
  const Vector i = act(rho, cell.W[0] * x + cell.b[0]);
  const Vector c_tilde = act(sigma, cell.W[1] * x + cell.b[1]);
  const Vector c = i.cwiseProduct(c_tilde);
  const Vector o = act(rho, cell.W[2] * x + cell.b[2]);
  return o.cwiseProduct(act(sigma, c));
}

Vector fnn_forward(const NetworkParams& params, const Eigen::Ref<const Vector>& x) {
  const Architecture& a = params.arch;
  if (x.size() != a.input_size()) {
    throw ShapeMismatch("forward: input has " + std::to_string(x.size()) + " entries, expected " +
                        std::to_string(a.input_size()));
  }
  Vector h = (x - params.input_shift).cwiseProduct(params.input_scale);
  for (int k = 0; k < a.n_transitions(); ++k) {
    const LayerParams& l = params.layers[static_cast<std::size_t>(k)];
    const Activation act = a.activations[k + 1];
    if (a.layer_kinds[k] == LayerKind::Dense) {
      Vector z = l.W[0] * h + l.b[0];
      h = z.unaryExpr([act](double t) { return activate(act, t); });
    } else {
      h = lstm_forward(l, act, a.recurrent_activations[k], h);
    }
  }
  return h.cwiseProduct(params.output_scale) + params.output_shift;
}

namespace {

// Column-per-sample forward pass keeping what the backward pass needs.
struct Cache {
  std::vector<Matrix> inputs;            // layer input, n_k x batch
  std::vector<std::vector<Matrix>> pre;  // pre-activations per block (LSTM: zi, zc, zo, c)
  Matrix output;                         // normalized output, n_K x batch
};

Cache forward_cache(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X, bool keep) {
  const Architecture& a = params.arch;
  Cache cache;
  Matrix h = ((X.rowwise() - params.input_shift.transpose()).array().rowwise() *
              params.input_scale.transpose().array())
                 .matrix()
                 .transpose();
  for (int k = 0; k < a.n_transitions(); ++k) {
    const LayerParams& l = params.layers[static_cast<std::size_t>(k)];
    const Activation act = a.activations[k + 1];
    std::vector<Matrix> pre;
    Matrix next;
    if (a.layer_kinds[k] == LayerKind::Dense) {
      Matrix z = l.W[0] * h;
      z.colwise() += l.b[0];
      next = z;
      apply(act, next);
      if (keep) pre.push_back(std::move(z));
    } else {
      const Activation rho = a.recurrent_activations[k];
      Matrix zi = l.W[0] * h;
      zi.colwise() += l.b[0];
      Matrix zc = l.W[1] * h;
      zc.colwise() += l.b[1];
      Matrix zo = l.W[2] * h;
      zo.colwise() += l.b[2];
      Matrix i = zi, ct = zc, o = zo;
      apply(rho, i);
      apply(act, ct);
      apply(rho, o);
      Matrix c = i.cwiseProduct(ct);
      Matrix sc = c;
      apply(act, sc);
      next = o.cwiseProduct(sc);
      if (keep) {
        pre.push_back(std::move(zi));
        pre.push_back(std::move(zc));
        pre.push_back(std::move(zo));
        pre.push_back(std::move(c));
      }
    }
    if (keep) {
      cache.inputs.push_back(std::move(h));
      cache.pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  cache.output = std::move(h);
  return cache;
}

void check_batch(const NetworkParams& params, Index cols, const char* what) {
  if (cols != params.arch.input_size()) {
    throw ShapeMismatch(std::string(what) + ": input has " + std::to_string(cols) + " columns, expected " +
                        std::to_string(params.arch.input_size()));
  }
}

Matrix prime(Activation a, const Matrix& z) {
  return z.unaryExpr([a](double t) { return activate_prime(a, t); });
}

}  // namespace

RowMatrix batch_evaluate(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X) {
  check_batch(params, X.cols(), "batch_evaluate");
  const Cache c = forward_cache(params, X, false);
  RowMatrix Y = c.output.transpose();
  Y = (Y.array().rowwise() * params.output_scale.transpose().array()).matrix();
  Y.rowwise() += params.output_shift.transpose();
  return Y;
}

namespace {

Matrix normalized_targets(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& Y) {
  if (Y.cols() != params.arch.output_size()) throw ShapeMismatch("targets have the wrong number of columns");
  return ((Y.rowwise() - params.output_shift.transpose()).array().rowwise() /
          params.output_scale.transpose().array())
      .matrix()
      .transpose();
}

}  // namespace

double normalized_mse(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X,
                      const Eigen::Ref<const RowMatrix>& Y) {
  check_batch(params, X.cols(), "normalized_mse");
  if (X.rows() != Y.rows()) throw ShapeMismatch("normalized_mse: row count mismatch");
  const Cache c = forward_cache(params, X, false);
  const Matrix T = normalized_targets(params, Y);
  return (c.output - T).squaredNorm() / static_cast<double>(T.size());
}

double mse(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X, const Eigen::Ref<const RowMatrix>& Y) {
  if (X.rows() != Y.rows()) throw ShapeMismatch("mse: row count mismatch");
  const RowMatrix P = batch_evaluate(params, X);
  if (P.cols() != Y.cols()) throw ShapeMismatch("mse: target width mismatch");
  return (P - Y).squaredNorm() / static_cast<double>(Y.size());
}

std::vector<LayerParams> loss_gradient(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X,
                                       const Eigen::Ref<const RowMatrix>& Y, double* loss) {
  check_batch(params, X.cols(), "loss_gradient");
  if (X.rows() != Y.rows()) throw ShapeMismatch("loss_gradient: row count mismatch");
  const Architecture& a = params.arch;
  const Cache cache = forward_cache(params, X, true);
  const Matrix T = normalized_targets(params, Y);

  std::vector<LayerParams> grad(params.layers.size());
  Matrix delta = (2.0 / static_cast<double>(T.size())) * (cache.output - T);
  if (loss != nullptr) *loss = (cache.output - T).squaredNorm() / static_cast<double>(T.size());
  for (int k = a.n_transitions() - 1; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    const LayerParams& l = params.layers[ku];
    const Matrix& in = cache.inputs[ku];
    const std::vector<Matrix>& pre = cache.pre[ku];
    const Activation act = a.activations[k + 1];
    LayerParams& g = grad[ku];
    if (a.layer_kinds[k] == LayerKind::Dense) {
      const Matrix dz = delta.cwiseProduct(prime(act, pre[0]));
      g.W.push_back(dz * in.transpose());
      g.b.push_back(dz.rowwise().sum());
      delta = l.W[0].transpose() * dz;
    } else {
      const Activation rho = a.recurrent_activations[k];
      const Matrix& zi = pre[0];
      const Matrix& zc = pre[1];
      const Matrix& zo = pre[2];
      const Matrix& c = pre[3];
      Matrix i = zi, ct = zc, o = zo, sc = c;
      apply(rho, i);
      apply(act, ct);
      apply(rho, o);
      apply(act, sc);
      const Matrix d_o = delta.cwiseProduct(sc);
      const Matrix d_c = delta.cwiseProduct(o).cwiseProduct(prime(act, c));
      const Matrix dzi = d_c.cwiseProduct(ct).cwiseProduct(prime(rho, zi));
      const Matrix dzc = d_c.cwiseProduct(i).cwiseProduct(prime(act, zc));
      const Matrix dzo = d_o.cwiseProduct(prime(rho, zo));
      for (const Matrix* dz : {&dzi, &dzc, &dzo}) {
        g.W.push_back(*dz * in.transpose());
        g.b.push_back(dz->rowwise().sum());
      }
      delta = l.W[0].transpose() * dzi + l.W[1].transpose() * dzc + l.W[2].transpose() * dzo;
    }
  }
  return grad;
}

}  // namespace kf
