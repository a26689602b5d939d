#include <algorithm>
#include <cmath>

#include "kf/diagnostics.hpp"
#include "kf/error.hpp"
#include "kf/kinetic.hpp"

namespace kf {

long Histogram::total() const {
  long t = 0;
  for (long c : counts) t += c;
  return t;
}

Histogram histogram(const std::vector<double>& x, double lo, double hi, int bins) {
  if (bins < 1) throw InvalidParameter("histogram: bins must be >= 1");
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) h.edges[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double w = (hi - lo) / bins;
  for (double v : x) {
    const long k = std::clamp(static_cast<long>(std::floor((v - lo) / w)), 0L, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

Histogram histogram_fd(const std::vector<double>& x) {
  if (x.empty()) return histogram(x, 0.0, 1.0, 1);
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < s.size() ? s[i] * (1.0 - f) + s[i + 1] * f : s[i];
  };
  const double lo = s.front(), hi = s.back();
  const double iqr = quantile(0.75) - quantile(0.25);
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(s.size()));
  int bins = 1;
  if (width > 0.0 && hi > lo) bins = static_cast<int>(std::clamp(std::ceil((hi - lo) / width), 1.0, 10000.0));
  return histogram(x, lo, hi, bins);
}

double consensus_metric(const ParticleEnsemble& ens, Target target) {
  const RowMatrix& v = ens.controlled();
  if (v.rows() == 0) return 0.0;
  const Eigen::RowVectorXd centre =
      target == Target::PairMean ? Eigen::RowVectorXd(v.colwise().mean()) : Eigen::RowVectorXd::Zero(v.cols());
  return (v.rowwise() - centre).rowwise().squaredNorm().mean();
}

DensitySnapshot make_snapshot(const ParticleEnsemble& ens, const ModelSpec& spec) {
  DensitySnapshot s;
  s.time = ens.time;
  s.step = ens.step_index;
  s.n = ens.size();
  const RowMatrix& v = ens.controlled();
  std::vector<double> x1(static_cast<std::size_t>(ens.size()));
  for (Index i = 0; i < ens.size(); ++i) x1[static_cast<std::size_t>(i)] = ens.positions(i, 0);
  s.histograms["x_1"] = histogram_fd(x1);
  if (ens.second_order()) {
    std::vector<double> speed(static_cast<std::size_t>(ens.size()));
    for (Index i = 0; i < ens.size(); ++i) speed[static_cast<std::size_t>(i)] = v.row(i).norm();
    s.histograms["velocity_norm"] = histogram_fd(speed);
  }
  s.velocity_mean = v.colwise().mean().transpose();
  const RowMatrix c = v.rowwise() - s.velocity_mean.transpose();
  s.velocity_cov = c.transpose() * c / static_cast<double>(std::max<Index>(1, v.rows()));
  s.consensus = consensus_metric(ens, spec.target);
  return s;
}

double stage_cost(const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& u, const Matrix& Q,
                  const Matrix& R) {
  if (Q.rows() != s.size() || Q.cols() != s.size() || R.rows() != u.size() || R.cols() != u.size()) {
    throw ShapeMismatch("stage_cost: dimension mismatch");
  }
  return s.dot(Q * s) + u.dot(R * u);
}

double running_cost(const std::vector<StepPairs>& steps, const Matrix& Q, const Matrix& R) {
  double total = 0.0;
  for (const StepPairs& st : steps) {
    if (st.states.rows() != st.controls.rows()) throw ShapeMismatch("running_cost: states and controls differ");
    if (st.n_particles < 1) throw InvalidParameter("running_cost: n_particles must be >= 1");
    double sum = 0.0;
    for (Index r = 0; r < st.states.rows(); ++r) {
      sum += stage_cost(st.states.row(r).transpose(), st.controls.row(r).transpose(), Q, R);
    }
    total += st.dt / static_cast<double>(st.n_particles) * sum;
  }
  return total;
}

double running_cost(const std::vector<CostRecord>& records) {
  double total = 0.0;
  for (const CostRecord& r : records) {
    total += r.dt / static_cast<double>(r.n_particles) * (r.state_cost + r.control_cost);
  }
  return total;
}

}  // namespace kf
