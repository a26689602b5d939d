#include "kf/meanfield1d.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "kf/error.hpp"
#include "kf/sdre.hpp"

namespace kf {

Vector uniform_nodes(double lo, double hi, int M) {
  if (M < 2 || !(hi > lo)) throw InvalidParameter("uniform_nodes: need M >= 2 and hi > lo");
  return Vector::LinSpaced(M, lo, hi);
}

Vector periodic_nodes(double lo, double hi, int M) {
  if (M < 2 || !(hi > lo)) throw InvalidParameter("periodic_nodes: need M >= 2 and hi > lo");
  const double h = (hi - lo) / M;
  return Vector::LinSpaced(M, lo, hi - h);
}

Vector trapezoid_weights(const Vector& nodes) {
  const Index m = nodes.size();
  if (m < 2) throw InvalidParameter("trapezoid_weights: need at least two nodes");
  Vector w = Vector::Zero(m);
  for (Index k = 0; k + 1 < m; ++k) {
    const double h = nodes(k + 1) - nodes(k);
    w(k) += 0.5 * h;
    w(k + 1) += 0.5 * h;
  }
  return w;
}

double mass(const GridDensity& f) { return trapezoid_weights(f.nodes).dot(f.values); }

void normalize(GridDensity& f) {
  const double m = mass(f);
  if (!(m > 0.0) || !std::isfinite(m)) throw NonFiniteState("grid density has no mass to normalize");
  f.values /= m;
}

GridDensity initial_density(const InitialDistribution& dist, const Vector& nodes) {
  validate(dist);
  if (dist.dim() != 1) throw InvalidParameter("initial_density: distribution must be one-dimensional");
  using K = InitialDistribution::Kind;
  GridDensity f;
  f.nodes = nodes;
  f.values = Vector::Zero(nodes.size());
  const auto gauss = [](double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
  };
  const bool box = dist.lo.size() == 1;
  for (Index k = 0; k < nodes.size(); ++k) {
    const double x = nodes(k);
    if (box && (x < dist.lo(0) || x > dist.hi(0))) continue;
    switch (dist.kind) {
      case K::Uniform: f.values(k) = 1.0; break;
      case K::Gaussian: f.values(k) = gauss(x, dist.mean(0), dist.sigma); break;
      case K::Mixture:
        for (std::size_t c = 0; c < dist.weights.size(); ++c) {
          f.values(k) += dist.weights[c] * gauss(x, dist.means[c], dist.sigmas[c]);
        }
        break;
      case K::PointMass: break;
    }
  }
  if (dist.kind == K::PointMass) {
    Index k = 0;
    (nodes.array() - dist.mean(0)).abs().minCoeff(&k);
    f.values(k) = 1.0;
  }
  normalize(f);
  return f;
}

Matrix tabulate_binary_control(const Controller& controller, const ModelSpec& spec, const Vector& nodes, double dt) {
  if (spec.order != Order::First || spec.d != 1) {
    throw InvalidParameter("mean-field control table needs a first-order one-dimensional model");
  }
  const Index m = nodes.size();
  RowMatrix S(m * m, 2);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      S(i * m + j, 0) = nodes(i);
      S(i * m + j, 1) = nodes(j);
    }
  }
  const PairUpdate up = controller.apply(spec, S, dt);
  Matrix T(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) T(i, j) = up.controls(i * m + j, 0);
  }
  return T;
}

Vector reconstruct_mf_control(const Matrix& table, const GridDensity& f) {
  if (table.rows() != f.nodes.size() || table.cols() != f.nodes.size()) {
    throw ShapeMismatch("reconstruct_mf_control: table does not match the grid");
  }
  return table * trapezoid_weights(f.nodes).cwiseProduct(f.values);
}

Vector reconstruct_mf_control(const Controller& controller, const ModelSpec& spec, const GridDensity& f, double dt) {
  return reconstruct_mf_control(tabulate_binary_control(controller, spec, f.nodes, dt), f);
}

Vector interaction_field(const ModelSpec& spec, const GridDensity& f) {
  if (spec.order != Order::First || spec.d != 1) throw InvalidParameter("interaction_field: needs a 1-D first-order model");
  const Vector wf = trapezoid_weights(f.nodes).cwiseProduct(f.values);
  const double m0 = wf.sum();
  const double m1 = f.nodes.dot(wf);
  Vector out(f.nodes.size());
  for (Index i = 0; i < out.size(); ++i) {
    const double x = f.nodes(i);
    double P = 0.0;
    switch (spec.kind) {
      case ModelKind::Sznajd: P = kernel_sznajd(x, spec.params.beta); break;
      case ModelKind::ConstantKernel: P = spec.params.kernel; break;
      default: throw InvalidParameter("interaction_field: unsupported model");
    }
    out(i) = P * (m1 - x * m0);
  }
  return out;
}

GridDensity mf_step(const GridDensity& f, const Vector& a, double dt, Boundary boundary) {
  const Index m = f.nodes.size();
  if (m < 2 || f.values.size() != m || a.size() != m) throw ShapeMismatch("mf_step: grid sizes differ");
  if (!(dt > 0.0)) throw InvalidParameter("mf_step: dt must be positive");
  const double x0 = f.nodes(0);
  const double h = f.nodes(1) - f.nodes(0);
  const double lo = x0;
  const double hi = boundary == Boundary::Periodic ? x0 + m * h : f.nodes(m - 1);

  GridDensity out;
  out.nodes = f.nodes;
  out.time = f.time + dt;
  out.values.resize(m);
  for (Index i = 0; i < m; ++i) {
    double foot = f.nodes(i) - dt * a(i);
    double value;
    if (boundary == Boundary::Periodic) {
      foot = lo + std::fmod(std::fmod(foot - lo, hi - lo) + (hi - lo), hi - lo);
      const double s = (foot - x0) / h;
      Index k = static_cast<Index>(std::floor(s));
      const double t = s - static_cast<double>(k);
      k = ((k % m) + m) % m;
      value = (1.0 - t) * f.values(k) + t * f.values((k + 1) % m);
    } else {
      foot = std::clamp(foot, lo, hi);
      const double s = (foot - x0) / h;
      const Index k = std::min<Index>(static_cast<Index>(std::floor(s)), m - 2);
      const double t = s - static_cast<double>(k);
      value = (1.0 - t) * f.values(k) + t * f.values(k + 1);
    }
    double da;
    if (boundary == Boundary::Periodic) {
      da = (a((i + 1) % m) - a((i + m - 1) % m)) / (2.0 * h);
    } else if (i == 0) {
      da = (a(1) - a(0)) / h;
    } else if (i == m - 1) {
      da = (a(m - 1) - a(m - 2)) / h;
    } else {
      da = (a(i + 1) - a(i - 1)) / (2.0 * h);
    }
    out.values(i) = std::max(0.0, value) * std::max(0.0, 1.0 - dt * da);
  }
  if (boundary == Boundary::Periodic) {
    const double total = h * out.values.sum();
    if (!(total > 0.0)) throw NonFiniteState("mf_step: density lost all mass");
    out.values /= total;
  } else {
    normalize(out);
  }
  return out;
}

void validate(const MeanFieldConfig& cfg) {
  validate(cfg.model);
  if (cfg.model.order != Order::First || cfg.model.d != 1) {
    throw InvalidParameter("meanfield: model must be first order with d = 1");
  }
  if (cfg.M < 2) throw InvalidParameter("meanfield: M must be >= 2");
  if (!(cfg.dt > 0.0)) throw InvalidParameter("meanfield: dt must be positive");
  if (cfg.n_steps < 0) throw InvalidParameter("meanfield: n_steps must be >= 0");
  if (cfg.f0.dim() != 0) validate(cfg.f0);
}

MeanFieldResult mf_simulate(const MeanFieldConfig& cfg, const Controller& controller) {
  validate(cfg);
  const ModelSpec& spec = cfg.model;
  const double lo = spec.domain_lo(0), hi = spec.domain_hi(0);
  const Vector nodes = cfg.boundary == Boundary::Periodic ? periodic_nodes(lo, hi, cfg.M) : uniform_nodes(lo, hi, cfg.M);
  const InitialDistribution f0 = cfg.f0.dim() != 0 ? cfg.f0 : default_bimodal(spec);
  const Matrix table = tabulate_binary_control(controller, spec, nodes, cfg.dt);

  MeanFieldResult res;
  GridDensity f = initial_density(f0, nodes);
  for (int n = 0;; ++n) {
    Vector u = reconstruct_mf_control(table, f);
    res.densities.push_back(f);
    res.controls.push_back(u);
    if (n == cfg.n_steps) break;
    f = mf_step(f, interaction_field(spec, f) + u, cfg.dt, cfg.boundary);
  }
  res.cost = mf_cost(res.densities, res.controls, spec.gamma);
  return res;
}

double mf_cost(const std::vector<GridDensity>& densities, const std::vector<Vector>& controls, double gamma) {
  if (densities.size() != controls.size()) throw ShapeMismatch("mf_cost: densities and controls differ in length");
  std::vector<double> integrand;
  for (std::size_t n = 0; n < densities.size(); ++n) {
    const GridDensity& f = densities[n];
    if (controls[n].size() != f.nodes.size()) throw ShapeMismatch("mf_cost: control does not match the grid");
    const Vector w = trapezoid_weights(f.nodes);
    const Vector g = f.nodes.array().square() + gamma * controls[n].array().square();
    integrand.push_back(w.cwiseProduct(f.values).dot(g));
  }
  double total = 0.0;
  for (std::size_t n = 0; n + 1 < densities.size(); ++n) {
    total += 0.5 * (densities[n + 1].time - densities[n].time) * (integrand[n] + integrand[n + 1]);
  }
  return total;
}

void write_density_csv(const std::filesystem::path& path, const std::vector<GridDensity>& densities) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "t,x,f\n";
  for (const GridDensity& f : densities) {
    for (Index k = 0; k < f.nodes.size(); ++k) {
      os << format_double(f.time) << ',' << format_double(f.nodes(k)) << ',' << format_double(f.values(k)) << '\n';
    }
  }
}

void write_control_csv(const std::filesystem::path& path, const std::vector<GridDensity>& densities,
                       const std::vector<Vector>& controls) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "t,x,u\n";
  for (std::size_t n = 0; n < densities.size() && n < controls.size(); ++n) {
    const GridDensity& f = densities[n];
    for (Index k = 0; k < f.nodes.size(); ++k) {
      os << format_double(f.time) << ',' << format_double(f.nodes(k)) << ',' << format_double(controls[n](k)) << '\n';
    }
  }
}

}  // namespace kf
