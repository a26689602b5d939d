#include "kf/models.hpp"

#include <cmath>
#include <sstream>

#include "kf/error.hpp"

namespace kf {
namespace {

ModelSpec with_box(ModelSpec spec, double lo, double hi) {
  spec.domain_lo = Vector::Constant(spec.agent_dim(), lo);
  spec.domain_hi = Vector::Constant(spec.agent_dim(), hi);
  return spec;
}

// Kernel seen by the first agent of the pair (first-order and Cucker-Smale).
double pair_kernel(const ModelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x_star) {
  switch (spec.kind) {
    case ModelKind::Sznajd:
      return kernel_sznajd(x(0), spec.params.beta);
    case ModelKind::CuckerSmale:
      return kernel_cucker_smale(x, x_star);
    case ModelKind::ConstantKernel:
      return spec.params.kernel;
    case ModelKind::QuasiMorse:
      break;
  }
  throw InvalidParameter("pair_kernel: not a scalar-kernel model");
}

}  // namespace

void validate(const ModelSpec& spec) {
  std::ostringstream err;
  if (spec.d < 1) err << "d must be >= 1; ";
  if (!(spec.gamma > 0.0)) err << "gamma must be positive; ";
  switch (spec.kind) {
    case ModelKind::Sznajd:
      if (spec.order != Order::First || spec.d != 1) err << "Sznajd requires first order and d = 1; ";
      break;
    case ModelKind::ConstantKernel:
      if (spec.order != Order::First) err << "ConstantKernel requires first order; ";
      break;
    case ModelKind::CuckerSmale:
    case ModelKind::QuasiMorse:
      if (spec.order != Order::Second) err << to_string(spec.kind) << " requires second order; ";
      break;
  }
  if (spec.kind == ModelKind::QuasiMorse &&
      (!(spec.params.p > 0.0) || !(spec.params.l > 0.0) || spec.params.alpha < 0.0 ||
       !(spec.params.beta > 0.0))) {
    err << "quasi-Morse needs p > 0, l > 0, alpha >= 0, beta > 0; ";
  }
  if (spec.d >= 1) {
    if (spec.domain_lo.size() != spec.agent_dim() || spec.domain_hi.size() != spec.agent_dim()) {
      err << "domain bounds must have " << spec.agent_dim() << " entries; ";
    } else if (!(spec.domain_lo.array() < spec.domain_hi.array()).all()) {
      err << "domain_lo < domain_hi must hold componentwise; ";
    }
  }
  const std::string msg = err.str();
  if (!msg.empty()) throw InvalidParameter("invalid ModelSpec: " + msg);
}

ModelSpec make_sznajd(double beta, double gamma) {
  ModelSpec s;
  s.kind = ModelKind::Sznajd;
  s.d = 1;
  s.order = Order::First;
  s.params.beta = beta;
  s.gamma = gamma;
  s.target = Target::Zero;
  return with_box(s, -1.0, 1.0);
}

ModelSpec make_cucker_smale(int d, double gamma) {
  ModelSpec s;
  s.kind = ModelKind::CuckerSmale;
  s.d = d;
  s.order = Order::Second;
  s.gamma = gamma;
  s.target = Target::PairMean;
  return with_box(s, -5.0, 5.0);
}

ModelSpec make_quasi_morse(double gamma) {
  ModelSpec s;
  s.kind = ModelKind::QuasiMorse;
  s.d = 3;
  s.order = Order::Second;
  s.params.C = 0.6;
  s.params.p = 1.5;
  s.params.l = 0.5;
  s.params.alpha = 2.0;
  s.params.beta = 1.5;
  s.gamma = gamma;
  s.target = Target::PairMean;
  return with_box(s, -4.0, 4.0);
}

ModelSpec make_constant_kernel(double kernel, double gamma, int d) {
  ModelSpec s;
  s.kind = ModelKind::ConstantKernel;
  s.d = d;
  s.order = Order::First;
  s.params.kernel = kernel;
  s.gamma = gamma;
  s.target = Target::Zero;
  return with_box(s, -1.0, 1.0);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Sznajd: return "sznajd";
    case ModelKind::CuckerSmale: return "cucker_smale";
    case ModelKind::QuasiMorse: return "quasi_morse";
    case ModelKind::ConstantKernel: return "constant_kernel";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "sznajd") return ModelKind::Sznajd;
  if (name == "cucker_smale") return ModelKind::CuckerSmale;
  if (name == "quasi_morse") return ModelKind::QuasiMorse;
  if (name == "constant_kernel") return ModelKind::ConstantKernel;
  throw InvalidParameter("unknown model kind '" + std::string(name) + "'");
}

std::string to_string(Target target) { return target == Target::Zero ? "zero" : "pair_mean"; }

Target target_from_string(std::string_view name) {
  if (name == "zero") return Target::Zero;
  if (name == "pair_mean") return Target::PairMean;
  throw InvalidParameter("unknown target '" + std::string(name) + "'");
}

double kernel_sznajd(double x, double beta) { return beta * (1.0 - x * x); }

double kernel_cucker_smale(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x_star) {
  if (x.size() != x_star.size()) throw ShapeMismatch("kernel_cucker_smale: dimension mismatch");
  return 1.0 / (1.0 + (x - x_star).squaredNorm());
}

MorseTerms morse_terms(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x_star,
                       const Eigen::Ref<const Vector>& v, const ModelSpec& spec) {
  if (spec.kind != ModelKind::QuasiMorse) throw InvalidParameter("morse_terms: not a quasi-Morse model");
  if (x.size() != x_star.size() || x.size() != v.size()) throw ShapeMismatch("morse_terms: dimension mismatch");
  const ModelParams& mp = spec.params;
  MorseTerms t;
  t.P_v = mp.alpha - mp.beta * v.squaredNorm();
  const double r = (x - x_star).norm();
  if (r < 1e-12) {
    t.degenerate_separation = true;
    t.P_x = 0.0;
    return t;
  }
  const double rp = std::pow(r, mp.p);
  const double lp = std::pow(mp.l, mp.p);
  t.P_x = std::pow(r, mp.p - 2.0) *
          (mp.C / lp * std::exp(-rp / (mp.p * lp)) - std::exp(-rp / mp.p));
  return t;
}

double morse_potential(double r, const ModelParams& params) {
  auto V = [&](double q) { return -std::exp(-std::pow(q, params.p) / params.p); };
  return V(r) - params.C * V(r / params.l);
}

SemilinearPair semilinearize(const ModelSpec& spec, const Eigen::Ref<const Vector>& s, double dt) {
  const int d = spec.d;
  const int n = spec.state_dim();
  if (s.size() != n) throw ShapeMismatch("semilinearize: state has wrong dimension");
  if (dt < 0.0) throw InvalidParameter("semilinearize: dt must be nonnegative");

  const Matrix Id = Matrix::Identity(d, d);
  Matrix G = Matrix::Zero(n, n);
  Matrix H = Matrix::Zero(n, spec.control_dim());

  if (spec.order == Order::First) {
    const auto x = s.segment(0, d);
    const auto xs = s.segment(d, d);
    const double p1 = pair_kernel(spec, x, xs);
    const double p2 = pair_kernel(spec, xs, x);
    G.block(0, 0, d, d) = -p1 * Id;
    G.block(0, d, d, d) = p1 * Id;
    G.block(d, 0, d, d) = p2 * Id;
    G.block(d, d, d, d) = -p2 * Id;
    H.setIdentity();
  } else {
    const auto x = s.segment(0, d);
    const auto xs = s.segment(d, d);
    const auto v = s.segment(2 * d, d);
    const auto vs = s.segment(3 * d, d);
    G.block(0, 2 * d, 2 * d, 2 * d).setIdentity();
    if (spec.kind == ModelKind::CuckerSmale) {
      const double P = kernel_cucker_smale(x, xs);
      G.block(2 * d, 2 * d, d, d) = -P * Id;
      G.block(2 * d, 3 * d, d, d) = P * Id;
      G.block(3 * d, 2 * d, d, d) = P * Id;
      G.block(3 * d, 3 * d, d, d) = -P * Id;
    } else {
      const MorseTerms t1 = morse_terms(x, xs, v, spec);
      const MorseTerms t2 = morse_terms(xs, x, vs, spec);
      // A_x couples coordinate k of x with coordinate k of x*.
      G.block(2 * d, 0, d, d) = -t1.P_x * Id;
      G.block(2 * d, d, d, d) = t1.P_x * Id;
      G.block(3 * d, 0, d, d) = t2.P_x * Id;
      G.block(3 * d, d, d, d) = -t2.P_x * Id;
      G.block(2 * d, 2 * d, d, d) = t1.P_v * Id;
      G.block(3 * d, 3 * d, d, d) = t2.P_v * Id;
    }
    H.block(2 * d, 0, 2 * d, 2 * d).setIdentity();
  }

  SemilinearPair out;
  out.A = Matrix::Identity(n, n) + dt * G;
  out.B = dt * H;
  out.dt = dt;
  return out;
}

CostMatrices cost_matrices(const ModelSpec& spec, double dt) {
  const int n = spec.state_dim();
  const int m = spec.control_dim();
  const int d = spec.d;
  const int off = spec.controlled_offset();
  CostMatrices c;
  c.Q = Matrix::Zero(n, n);
  if (spec.target == Target::PairMean) {
    const Matrix Id = Matrix::Identity(d, d);
    Matrix M(m, m);
    M << 0.5 * Id, 0.5 * Id, 0.5 * Id, 0.5 * Id;
    c.Q.block(off, off, m, m) = Matrix::Identity(m, m) + M.transpose() * M - 2.0 * M;
    c.R = 0.5 * spec.gamma * Matrix::Identity(m, m);
  } else {
    c.Q.block(off, off, m, m).setIdentity();
    c.R = spec.gamma * Matrix::Identity(m, m);
  }
  c.Q *= dt;
  c.R *= dt;
  return c;
}

Vector binary_step(const ModelSpec& spec, const Eigen::Ref<const Vector>& s,
                   const Eigen::Ref<const Vector>& u, double dt) {
  const int d = spec.d;
  if (s.size() != spec.state_dim() || u.size() != spec.control_dim()) {
    throw ShapeMismatch("binary_step: state or control has wrong dimension");
  }
  Vector out(s.size());
  if (spec.order == Order::First) {
    const auto x = s.segment(0, d);
    const auto xs = s.segment(d, d);
    const double p1 = pair_kernel(spec, x, xs);
    const double p2 = pair_kernel(spec, xs, x);
    out.segment(0, d) = x + dt * (p1 * (xs - x) + u.segment(0, d));
    out.segment(d, d) = xs + dt * (p2 * (x - xs) + u.segment(d, d));
    return out;
  }
  const auto x = s.segment(0, d);
  const auto xs = s.segment(d, d);
  const auto v = s.segment(2 * d, d);
  const auto vs = s.segment(3 * d, d);
  out.segment(0, d) = x + dt * v;
  out.segment(d, d) = xs + dt * vs;
  if (spec.kind == ModelKind::CuckerSmale) {
    const double P = kernel_cucker_smale(x, xs);
    out.segment(2 * d, d) = v + dt * (P * (vs - v) + u.segment(0, d));
    out.segment(3 * d, d) = vs + dt * (P * (v - vs) + u.segment(d, d));
  } else {
    const MorseTerms t1 = morse_terms(x, xs, v, spec);
    const MorseTerms t2 = morse_terms(xs, x, vs, spec);
    out.segment(2 * d, d) = v + dt * (t1.P_x * (xs - x) + t1.P_v * v + u.segment(0, d));
    out.segment(3 * d, d) = vs + dt * (t2.P_x * (x - xs) + t2.P_v * vs + u.segment(d, d));
  }
  return out;
}

Vector swap_agents(const ModelSpec& spec, const Eigen::Ref<const Vector>& s) {
  const int d = spec.d;
  Vector out(s.size());
  const int blocks = spec.order == Order::First ? 1 : 2;
  for (int b = 0; b < blocks; ++b) {
    out.segment(2 * b * d, d) = s.segment(2 * b * d + d, d);
    out.segment(2 * b * d + d, d) = s.segment(2 * b * d, d);
  }
  return out;
}

Vector swap_controls(const ModelSpec& spec, const Eigen::Ref<const Vector>& u) {
  const int d = spec.d;
  Vector out(u.size());
  out.segment(0, d) = u.segment(d, d);
  out.segment(d, d) = u.segment(0, d);
  return out;
}

}  // namespace kf
