#include <cmath>
#include <limits>
#include <numeric>

#include "kf/error.hpp"
#include "kf/neural.hpp"
#include "kf/rng.hpp"

namespace kf {

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw InvalidParameter("training: learning_rate must be positive");
  if (cfg.batch_size < 1) throw InvalidParameter("training: batch_size must be >= 1");
  if (cfg.epochs < 0) throw InvalidParameter("training: epochs must be >= 0");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) || !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) {
    throw InvalidParameter("training: Adam betas must lie in [0, 1)");
  }
  if (!(cfg.adam_eps > 0.0)) throw InvalidParameter("training: adam_eps must be positive");
  if (cfg.early_stop_patience < 1) throw InvalidParameter("training: early_stop_patience must be >= 1");
}

void fit_output_scaling(NetworkParams& params, const Eigen::Ref<const RowMatrix>& Y) {
  if (Y.cols() != params.arch.output_size() || Y.rows() == 0) {
    throw ShapeMismatch("fit_output_scaling: target shape mismatch");
  }
  const Vector mean = Y.colwise().mean().transpose();
  Vector sd = ((Y.rowwise() - mean.transpose()).colwise().squaredNorm() / static_cast<double>(Y.rows()))
                  .cwiseSqrt()
                  .transpose();
  for (Index k = 0; k < sd.size(); ++k) {
    if (!(sd(k) > 1e-12 * std::max(1.0, std::abs(mean(k))))) sd(k) = 1.0;
  }
  params.output_shift = mean;
  params.output_scale = sd;
}

void set_input_box(NetworkParams& params, const Vector& lo, const Vector& hi) {
  if (lo.size() != params.arch.input_size() || hi.size() != lo.size()) {
    throw ShapeMismatch("set_input_box: bounds must match the input size");
  }
  params.input_shift = 0.5 * (lo + hi);
  params.input_scale.resize(lo.size());
  for (Index k = 0; k < lo.size(); ++k) {
    const double w = hi(k) - lo(k);
    params.input_scale(k) = w > 0.0 ? 2.0 / w : 1.0;
  }
}

namespace {

struct Moments {
  std::vector<LayerParams> m;
  std::vector<LayerParams> v;
};

std::vector<LayerParams> zeros_like(const std::vector<LayerParams>& layers) {
  std::vector<LayerParams> z(layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    for (const Matrix& w : layers[k].W) z[k].W.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const Vector& b : layers[k].b) z[k].b.push_back(Vector::Zero(b.size()));
  }
  return z;
}

template <class T>
void adam_update(T& p, const T& g, T& m, T& v, const TrainConfig& cfg, double c1, double c2) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
  v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
  p.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
}

RowMatrix gather(const Eigen::Ref<const RowMatrix>& M, const std::vector<Index>& rows, std::size_t from,
                 std::size_t to) {
  RowMatrix out(static_cast<Index>(to - from), M.cols());
  for (std::size_t r = from; r < to; ++r) out.row(static_cast<Index>(r - from)) = M.row(rows[r]);
  return out;
}

}  // namespace

TrainResult train_from(NetworkParams init, const Eigen::Ref<const RowMatrix>& X_train,
                       const Eigen::Ref<const RowMatrix>& Y_train, const Eigen::Ref<const RowMatrix>& X_val,
                       const Eigen::Ref<const RowMatrix>& Y_val, const TrainConfig& cfg) {
  validate(cfg);
  validate(init);
  if (X_train.rows() == 0 || X_val.rows() == 0) throw InvalidParameter("training: empty training or validation set");
  if (X_train.rows() != Y_train.rows() || X_val.rows() != Y_val.rows()) {
    throw ShapeMismatch("training: inputs and targets differ in row count");
  }
  if (X_train.cols() != init.arch.input_size() || X_val.cols() != init.arch.input_size() ||
      Y_train.cols() != init.arch.output_size() || Y_val.cols() != init.arch.output_size()) {
    throw ShapeMismatch("training: data width does not match the architecture");
  }

  TrainResult result;
  NetworkParams params = std::move(init);
  Moments mom{zeros_like(params.layers), zeros_like(params.layers)};

  double best_val = normalized_mse(params, X_val, Y_val);
  if (!std::isfinite(best_val)) throw NonFiniteLoss(0, -1, "validation loss is not finite at initialization");
  result.history.initial_val_loss = best_val;
  result.params = params;

  const auto n = static_cast<std::size_t>(X_train.rows());
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<Index> order(n);
  long step = 0;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    CounterRng rng(cfg.seed, streams::kShuffle, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    long batch = 0;
    for (std::size_t from = 0; from < n; from += bs, ++batch) {
      const std::size_t to = std::min(n, from + bs);
      const RowMatrix Xb = gather(X_train, order, from, to);
      const RowMatrix Yb = gather(Y_train, order, from, to);
      double bl = 0.0;
      const std::vector<LayerParams> g = loss_gradient(params, Xb, Yb, &bl);
      ++step;
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < params.layers.size(); ++k) {
        for (std::size_t b = 0; b < params.layers[k].W.size(); ++b) {
          adam_update(params.layers[k].W[b], g[k].W[b], mom.m[k].W[b], mom.v[k].W[b], cfg, c1, c2);
          adam_update(params.layers[k].b[b], g[k].b[b], mom.m[k].b[b], mom.v[k].b[b], cfg, c1, c2);
        }
      }
      if (!std::isfinite(bl)) {
        throw NonFiniteLoss(epoch, batch,
                            "training loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch));
      }
      epoch_loss += bl * static_cast<double>(to - from);
    }
    epoch_loss /= static_cast<double>(n);
    const double val = normalized_mse(params, X_val, Y_val);
    if (!std::isfinite(val)) {
      throw NonFiniteLoss(epoch, batch, "validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.history.train_loss.push_back(epoch_loss);
    result.history.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      result.params = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  return result;
}

TrainResult train(const Architecture& arch, const Eigen::Ref<const RowMatrix>& X_train,
                  const Eigen::Ref<const RowMatrix>& Y_train, const Eigen::Ref<const RowMatrix>& X_val,
                  const Eigen::Ref<const RowMatrix>& Y_val, const TrainConfig& cfg, const Vector& input_lo,
                  const Vector& input_hi) {
  NetworkParams p = glorot_init(arch, cfg.seed);
  if (X_train.rows() == 0) throw InvalidParameter("training: empty training set");
  if (X_train.cols() != arch.input_size()) throw ShapeMismatch("training: input width does not match the architecture");
  if (input_lo.size() > 0) {
    set_input_box(p, input_lo, input_hi);
  } else {
    set_input_box(p, X_train.colwise().minCoeff().transpose(), X_train.colwise().maxCoeff().transpose());
  }
  fit_output_scaling(p, Y_train);
  return train_from(std::move(p), X_train, Y_train, X_val, Y_val, cfg);
}

FitReport fit_report(const NetworkParams& params, const Eigen::Ref<const RowMatrix>& X,
                     const Eigen::Ref<const RowMatrix>& Y) {
  const RowMatrix P = batch_evaluate(params, X);
  if (P.rows() != Y.rows() || P.cols() != Y.cols()) throw ShapeMismatch("fit_report: target shape mismatch");
  FitReport r;
  const RowMatrix E = P - Y;
  const double sse = E.squaredNorm();
  r.mse = sse / static_cast<double>(Y.size());
  r.rmse = std::sqrt(r.mse);
  const double ynorm = Y.squaredNorm();
  r.relative_rmse = ynorm > 0.0 ? std::sqrt(sse / ynorm) : std::sqrt(sse);
  const RowMatrix centered = Y.rowwise() - Y.colwise().mean();
  const double sst = centered.squaredNorm();
  r.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
  double acc = 0.0;
  long counted = 0;
  for (Index i = 0; i < Y.rows(); ++i) {
    const double yn = Y.row(i).norm();
    if (yn > 0.0) {
      acc += E.row(i).norm() / yn;
      ++counted;
    }
  }
  r.mre = counted > 0 ? acc / static_cast<double>(counted) : 0.0;
  return r;
}

TuneResult tune(const std::vector<Architecture>& candidates, const Eigen::Ref<const RowMatrix>& X_train,
                const Eigen::Ref<const RowMatrix>& Y_train, const Eigen::Ref<const RowMatrix>& X_val,
                const Eigen::Ref<const RowMatrix>& Y_val, const TrainConfig& cfg, const Vector& input_lo,
                const Vector& input_hi) {
  if (candidates.empty()) throw InvalidParameter("tune: no candidate architectures");
  TuneResult out;
  int best = -1;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    TuneEntry e;
    e.arch = candidates[c];
    try {
      TrainResult tr = train(candidates[c], X_train, Y_train, X_val, Y_val, cfg, input_lo, input_hi);
      e.val_relative_rmse = fit_report(tr.params, X_val, Y_val).relative_rmse;
      e.n_parameters = tr.params.n_parameters();
      const bool better =
          best < 0 || e.val_relative_rmse < out.report[static_cast<std::size_t>(best)].val_relative_rmse ||
          (e.val_relative_rmse == out.report[static_cast<std::size_t>(best)].val_relative_rmse &&
           e.n_parameters < out.report[static_cast<std::size_t>(best)].n_parameters);
      if (better) {
        best = static_cast<int>(c);
        out.best = candidates[c];
        out.best_params = std::move(tr.params);
      }
    } catch (const Error& err) {
      e.failed = true;
      e.error = err.what();
      e.val_relative_rmse = std::numeric_limits<double>::infinity();
    }
    out.report.push_back(std::move(e));
  }
  if (best < 0) throw Error("tune: every candidate failed to train");
  return out;
}

}  // namespace kf
