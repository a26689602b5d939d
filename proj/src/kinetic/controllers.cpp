#include <atomic>
#include <limits>

#include "kf/error.hpp"
#include "kf/kinetic.hpp"
#include "kf/sdre.hpp"

namespace kf {

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::ExactDsdre: return "exact_dsdre";
    case ControllerKind::NnControl: return "nn_control";
    case ControllerKind::NnStateUpdate: return "nn_state_update";
    case ControllerKind::Zero: return "zero";
  }
  return "?";
}

ControllerKind controller_kind_from_string(std::string_view name) {
  if (name == "exact_dsdre" || name == "exact") return ControllerKind::ExactDsdre;
  if (name == "nn_control") return ControllerKind::NnControl;
  if (name == "nn_state_update") return ControllerKind::NnStateUpdate;
  if (name == "zero") return ControllerKind::Zero;
  throw InvalidParameter("unknown controller '" + std::string(name) + "'");
}

void check_surrogate_shape(const ModelSpec& spec, const NetworkParams& params) {
  validate(params);
  if (params.arch.input_size() != spec.state_dim() + 1 || params.arch.output_size() != spec.control_dim()) {
    throw InvalidParameter("surrogate network maps " + std::to_string(params.arch.input_size()) + " -> " +
                           std::to_string(params.arch.output_size()) + ", model needs " +
                           std::to_string(spec.state_dim() + 1) + " -> " + std::to_string(spec.control_dim()));
  }
}

namespace {

void check_batch(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S) {
  if (S.cols() != spec.state_dim()) throw ShapeMismatch("controller: pair batch has the wrong width");
}

RowMatrix with_dt(const Eigen::Ref<const RowMatrix>& S, double eps) {
  RowMatrix X(S.rows(), S.cols() + 1);
  X.leftCols(S.cols()) = S;
  X.col(S.cols()).setConstant(eps);
  return X;
}

// post.row(r) = binary_step(S.row(r), U.row(r)).
void step_rows(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S, const RowMatrix& U, double eps,
               RowMatrix& post) {
  post.resize(S.rows(), S.cols());
  for (Index r = 0; r < S.rows(); ++r) {
    post.row(r) = binary_step(spec, S.row(r).transpose(), U.row(r).transpose(), eps).transpose();
  }
}

}  // namespace

PairUpdate ZeroController::apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S, double eps) const {
  check_batch(spec, S);
  PairUpdate out;
  out.controls = RowMatrix::Zero(S.rows(), spec.control_dim());
  step_rows(spec, S, out.controls, eps, out.post);
  return out;
}

PairUpdate ExactDsdreController::apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S,
                                       double eps) const {
  check_batch(spec, S);
  PairUpdate out;
  out.controls.resize(S.rows(), spec.control_dim());
  out.post.resize(S.rows(), S.cols());
  std::atomic<Index> failed_row{std::numeric_limits<Index>::max()};
  std::string message;
  const Index n = S.rows();
#pragma omp parallel for schedule(dynamic, 16)
  for (Index r = 0; r < n; ++r) {
    if (failed_row.load(std::memory_order_relaxed) != std::numeric_limits<Index>::max()) continue;
    try {
      const Vector s = S.row(r).transpose();
      const Vector u = dsdre_control(spec, s, eps, opts_);
      out.controls.row(r) = u.transpose();
      out.post.row(r) = binary_step(spec, s, u, eps).transpose();
    } catch (const Error& e) {
#pragma omp critical(kf_controller_failure)
      {
        if (r < failed_row.load()) {
          failed_row.store(r);
          message = e.what();
        }
      }
    }
  }
  if (failed_row.load() != std::numeric_limits<Index>::max()) {
    throw ControllerFailure(failed_row.load(), -1, message);
  }
  return out;
}

NnControlController::NnControlController(NetworkParams params) : params_(std::move(params)) { validate(params_); }

PairUpdate NnControlController::apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S, double eps) const {
  check_batch(spec, S);
  check_surrogate_shape(spec, params_);
  PairUpdate out;
  out.controls = batch_evaluate(params_, with_dt(S, eps));
  step_rows(spec, S, out.controls, eps, out.post);
  return out;
}

NnStateUpdateController::NnStateUpdateController(NetworkParams params) : params_(std::move(params)) {
  validate(params_);
}

PairUpdate NnStateUpdateController::apply(const ModelSpec& spec, const Eigen::Ref<const RowMatrix>& S,
                                          double eps) const {
  check_batch(spec, S);
  check_surrogate_shape(spec, params_);
  if (!(eps > 0.0)) throw InvalidParameter("state-update controller needs eps > 0");
  const RowMatrix C = batch_evaluate(params_, with_dt(S, eps));
  PairUpdate out;
  const RowMatrix U0 = RowMatrix::Zero(S.rows(), spec.control_dim());
  step_rows(spec, S, U0, eps, out.post);
  const int off = spec.controlled_offset();
  const int mu = spec.control_dim();
  out.controls = (C - out.post.middleCols(off, mu)) / eps;
  out.post.middleCols(off, mu) = C;
  return out;
}

std::unique_ptr<Controller> make_controller(const KineticConfig& cfg) {
  switch (cfg.controller) {
    case ControllerKind::Zero: return std::make_unique<ZeroController>();
    case ControllerKind::ExactDsdre: return std::make_unique<ExactDsdreController>(cfg.dare);
    case ControllerKind::NnControl:
    case ControllerKind::NnStateUpdate: {
      if (cfg.model_file.empty()) throw ConfigError("NN controller needs a model file");
      SurrogateModel m = load_model(std::filesystem::path(cfg.model_file));
      const SurrogateKind want =
          cfg.controller == ControllerKind::NnControl ? SurrogateKind::Control : SurrogateKind::StateUpdate;
      if (m.kind != want) throw ConfigError("model file " + cfg.model_file + " holds the wrong surrogate kind");
      check_surrogate_shape(cfg.model, m.params);
      if (want == SurrogateKind::Control) return std::make_unique<NnControlController>(std::move(m.params));
      return std::make_unique<NnStateUpdateController>(std::move(m.params));
    }
  }
  throw InvalidParameter("unknown controller kind");
}

}  // namespace kf
