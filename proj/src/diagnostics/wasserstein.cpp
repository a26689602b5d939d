#include <algorithm>
#include <cmath>

#include "kf/diagnostics.hpp"
#include "kf/error.hpp"

// W1 on the line is the L1 distance between CDFs. Between consecutive
// breakpoints (samples and grid nodes) an empirical CDF is constant and the
// CDF of a piecewise-linear density is quadratic, so |F - G| is integrated
// exactly by splitting at the roots of the quadratic difference.

namespace kf {
namespace {

class Cdf {
 public:
  static Cdf samples(std::vector<double> x) {
    if (x.empty()) throw InvalidParameter("wasserstein1_1d: empty sample set");
    for (double v : x) {
      if (!std::isfinite(v)) throw InvalidParameter("wasserstein1_1d: non-finite sample");
    }
    Cdf c;
    std::sort(x.begin(), x.end());
    c.points_ = std::move(x);
    return c;
  }

  static Cdf grid(const Vector& nodes, const Vector& density) {
    const Index m = nodes.size();
    if (m < 2 || density.size() != m) throw InvalidParameter("wasserstein1_1d: grid needs >= 2 nodes and matching values");
    Cdf c;
    c.is_grid_ = true;
    c.points_.assign(nodes.data(), nodes.data() + m);
    c.f_.resize(static_cast<std::size_t>(m));
    for (Index k = 0; k < m; ++k) {
      if (k > 0 && !(nodes(k) > nodes(k - 1))) throw InvalidParameter("wasserstein1_1d: grid nodes must increase");
      if (!(density(k) >= 0.0)) throw InvalidParameter("wasserstein1_1d: density must be nonnegative");
      c.f_[static_cast<std::size_t>(k)] = density(k);
    }
    c.cum_.assign(static_cast<std::size_t>(m), 0.0);
    for (std::size_t k = 1; k < c.cum_.size(); ++k) {
      c.cum_[k] = c.cum_[k - 1] + 0.5 * (c.f_[k - 1] + c.f_[k]) * (c.points_[k] - c.points_[k - 1]);
    }
    const double mass = c.cum_.back();
    if (!(mass > 0.0)) throw InvalidParameter("wasserstein1_1d: density has zero mass");
    for (double& v : c.f_) v /= mass;
    for (double& v : c.cum_) v /= mass;
    return c;
  }

  const std::vector<double>& points() const { return points_; }

  // CDF at x; for samples, the value on the open interval containing `inside`.
  double at(double x, double inside) const {
    if (!is_grid_) {
      const auto it = std::upper_bound(points_.begin(), points_.end(), inside);
      return static_cast<double>(it - points_.begin()) / static_cast<double>(points_.size());
    }
    if (x <= points_.front()) return 0.0;
    if (x >= points_.back()) return 1.0;
    const auto it = std::upper_bound(points_.begin(), points_.end(), inside);
    const std::size_t k = static_cast<std::size_t>(it - points_.begin()) - 1;
    const double h = points_[k + 1] - points_[k];
    const double t = x - points_[k];
    return cum_[k] + f_[k] * t + 0.5 * (f_[k + 1] - f_[k]) / h * t * t;
  }

 private:
  bool is_grid_ = false;
  std::vector<double> points_;
  std::vector<double> f_;
  std::vector<double> cum_;
};

// Exact integral over [0, 1] of |q(t)|, q the quadratic through (0, q0), (1/2, qm), (1, q1).
double abs_quadratic_integral(double q0, double qm, double q1) {
  const double a = 2.0 * q0 - 4.0 * qm + 2.0 * q1;
  const double b = -3.0 * q0 + 4.0 * qm - q1;
  const double c = q0;
  const auto q = [&](double t) { return (a * t + b) * t + c; };
  std::vector<double> cuts{0.0};
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (std::abs(a) > 1e-14 * scale) {
    const double disc = b * b - 4.0 * a * c;
    if (disc > 0.0) {
      const double sq = std::sqrt(disc);
      const double r = -0.5 * (b + (b >= 0.0 ? sq : -sq));
      for (double t : {r / a, r != 0.0 ? c / r : -1.0}) {
        if (t > 0.0 && t < 1.0) cuts.push_back(t);
      }
    }
  } else if (std::abs(b) > 0.0) {
    const double t = -c / b;
    if (t > 0.0 && t < 1.0) cuts.push_back(t);
  }
  cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k], hi = cuts[k + 1];
    total += std::abs((hi - lo) / 6.0 * (q(lo) + 4.0 * q(0.5 * (lo + hi)) + q(hi)));
  }
  return total;
}

double distance(const Cdf& F, const Cdf& G) {
  std::vector<double> br = F.points();
  br.insert(br.end(), G.points().begin(), G.points().end());
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = br[k], b = br[k + 1];
    const double m = 0.5 * (a + b);
    const double d0 = F.at(a, m) - G.at(a, m);
    const double dm = F.at(m, m) - G.at(m, m);
    const double d1 = F.at(b, m) - G.at(b, m);
    total += (b - a) * abs_quadratic_integral(d0, dm, d1);
  }
  return total;
}

}  // namespace

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  return distance(Cdf::samples(std::move(a)), Cdf::samples(std::move(b)));
}

double wasserstein1_1d(std::vector<double> samples, const Vector& nodes, const Vector& density) {
  return distance(Cdf::samples(std::move(samples)), Cdf::grid(nodes, density));
}

double wasserstein1_1d(const Vector& nodes_a, const Vector& density_a, const Vector& nodes_b,
                       const Vector& density_b) {
  return distance(Cdf::grid(nodes_a, density_a), Cdf::grid(nodes_b, density_b));
}

}  // namespace kf
