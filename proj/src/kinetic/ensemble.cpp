#include <fstream>
#include <limits>
#include <numeric>

#include "kf/error.hpp"
#include "kf/kinetic.hpp"
#include "kf/sdre.hpp"

namespace kf {

int InitialDistribution::dim() const {
  switch (kind) {
    case Kind::Uniform: return static_cast<int>(lo.size());
    case Kind::Gaussian:
    case Kind::PointMass: return static_cast<int>(mean.size());
    case Kind::Mixture: return static_cast<int>(lo.size());
  }
  return 0;
}

std::string to_string(InitialDistribution::Kind k) {
  switch (k) {
    case InitialDistribution::Kind::Uniform: return "uniform";
    case InitialDistribution::Kind::Gaussian: return "gaussian";
    case InitialDistribution::Kind::Mixture: return "mixture";
    case InitialDistribution::Kind::PointMass: return "point_mass";
  }
  return "?";
}

InitialDistribution::Kind distribution_kind_from_string(std::string_view name) {
  if (name == "uniform") return InitialDistribution::Kind::Uniform;
  if (name == "gaussian") return InitialDistribution::Kind::Gaussian;
  if (name == "mixture") return InitialDistribution::Kind::Mixture;
  if (name == "point_mass") return InitialDistribution::Kind::PointMass;
  throw InvalidParameter("unknown initial distribution '" + std::string(name) + "'");
}

void validate(const InitialDistribution& d) {
  using K = InitialDistribution::Kind;
  const bool has_box = d.lo.size() > 0 || d.hi.size() > 0;
  if (has_box) {
    if (d.lo.size() != d.hi.size()) throw InvalidParameter("initial distribution: lo and hi differ in size");
    if (((d.hi - d.lo).array() < 0.0).any()) throw InvalidParameter("initial distribution: lo > hi");
  }
  switch (d.kind) {
    case K::Uniform:
      if (!has_box || d.lo.size() == 0) throw InvalidParameter("uniform distribution needs lo and hi");
      break;
    case K::Gaussian:
      if (d.mean.size() == 0) throw InvalidParameter("gaussian distribution needs a mean");
      if (!(d.sigma > 0.0)) throw InvalidParameter("gaussian distribution needs sigma > 0");
      if (has_box && d.lo.size() != d.mean.size()) throw InvalidParameter("gaussian truncation box has wrong size");
      break;
    case K::PointMass:
      if (d.mean.size() == 0) throw InvalidParameter("point mass needs a location");
      break;
    case K::Mixture: {
      if (!has_box || d.lo.size() == 0) throw InvalidParameter("mixture needs a truncation box lo/hi");
      const std::size_t k = d.weights.size();
      if (k == 0 || d.means.size() != k || d.sigmas.size() != k) {
        throw InvalidParameter("mixture needs matching weights, means and sigmas");
      }
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        if (!(d.weights[i] >= 0.0) || !(d.sigmas[i] > 0.0)) {
          throw InvalidParameter("mixture weights must be >= 0 and sigmas > 0");
        }
        total += d.weights[i];
      }
      if (!(total > 0.0)) throw InvalidParameter("mixture weights sum to zero");
      break;
    }
  }
}

InitialDistribution uniform_box(const ModelSpec& spec) {
  InitialDistribution d;
  d.kind = InitialDistribution::Kind::Uniform;
  d.lo = spec.domain_lo;
  d.hi = spec.domain_hi;
  return d;
}

InitialDistribution default_bimodal(const ModelSpec& spec) {
  InitialDistribution d;
  d.kind = InitialDistribution::Kind::Mixture;
  d.lo = spec.domain_lo;
  d.hi = spec.domain_hi;
  d.weights = {0.5, 0.5};
  d.means = {-0.3, 0.3};
  d.sigmas = {0.1, 0.1};
  return d;
}

namespace {

constexpr int kMaxRejections = 100000;

// NaN when the box keeps rejecting.
double truncated(double lo, double hi, bool box, auto draw) {
  for (int t = 0; t < kMaxRejections; ++t) {
    const double x = draw();
    if (!box || (x >= lo && x <= hi)) return x;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

ParticleEnsemble sample_initial(const InitialDistribution& dist, const ModelSpec& spec, Index n, std::uint64_t seed) {
  validate(dist);
  if (n < 1) throw InvalidParameter("sample_initial: n must be >= 1");
  const int dim = spec.agent_dim();
  if (dist.dim() != dim) {
    throw InvalidParameter("initial distribution has dimension " + std::to_string(dist.dim()) + ", model agent has " +
                           std::to_string(dim));
  }
  using K = InitialDistribution::Kind;
  const bool box = dist.lo.size() == dim;
  double wsum = 0.0;
  for (double w : dist.weights) wsum += w;

  RowMatrix all(n, dim);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    CounterRng rng(seed, streams::kInitial, static_cast<std::uint64_t>(i));
    for (int k = 0; k < dim; ++k) {
      const double lo = box ? dist.lo(k) : 0.0;
      const double hi = box ? dist.hi(k) : 0.0;
      double x = 0.0;
      switch (dist.kind) {
        case K::Uniform: x = rng.uniform(lo, hi); break;
        case K::PointMass: x = dist.mean(k); break;
        case K::Gaussian:
          x = truncated(lo, hi, box, [&] { return dist.mean(k) + dist.sigma * rng.normal(); });
          break;
        case K::Mixture:
          x = truncated(lo, hi, box, [&] {
            double r = rng.uniform() * wsum;
            std::size_t c = 0;
            while (c + 1 < dist.weights.size() && r >= dist.weights[c]) r -= dist.weights[c++];
            return dist.means[c] + dist.sigmas[c] * rng.normal();
          });
          break;
      }
      all(i, k) = x;
    }
  }

  if (!all.allFinite()) throw InvalidParameter("initial distribution: truncation box has negligible mass");

  ParticleEnsemble e;
  e.seed = seed;
  e.positions = all.leftCols(spec.d);
  e.velocities = spec.order == Order::Second ? RowMatrix(all.rightCols(spec.d)) : RowMatrix(n, 0);
  return e;
}

std::vector<std::pair<Index, Index>> pair_particles(Index n, CounterRng& rng) {
  if (n < 2) throw InvalidParameter("pair_particles: need at least two particles");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(perm.size() / 2);
  for (std::size_t k = 0; k + 1 < perm.size(); k += 2) pairs.emplace_back(perm[k], perm[k + 1]);
  return pairs;
}

void write_snapshot_csv(const std::filesystem::path& path, const ParticleEnsemble& ens) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const Index d = ens.positions.cols();
  std::string line = "t,particle_id";
  for (Index k = 1; k <= d; ++k) line += ",x_" + std::to_string(k);
  for (Index k = 1; k <= ens.velocities.cols(); ++k) line += ",v_" + std::to_string(k);
  os << line << '\n';
  const std::string t = format_double(ens.time);
  for (Index i = 0; i < ens.size(); ++i) {
    line = t;
    line += ',';
    line += std::to_string(i);
    for (Index k = 0; k < d; ++k) {
      line += ',';
      line += format_double(ens.positions(i, k));
    }
    for (Index k = 0; k < ens.velocities.cols(); ++k) {
      line += ',';
      line += format_double(ens.velocities(i, k));
    }
    os << line << '\n';
  }
  if (!os) throw Error("write failed: " + path.string());
}

}  // namespace kf
