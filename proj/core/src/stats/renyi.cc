#include "msunet/stats/renyi.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "msunet/error.h"
#include "msunet/rng.h"

namespace msunet::stats {

void DivergenceConfig::Validate() const {
  if (k < 1) throw ConfigError("divergence.k", "must be >= 1");
  if (!std::isfinite(alpha) || alpha == 1.0) {
    throw ConfigError("divergence.alpha", "must be finite and different from 1");
  }
  if (!(jitter_scale >= 0.0) || !std::isfinite(jitter_scale)) {
    throw ConfigError("divergence.jitter_scale", "must be >= 0");
  }
  // Gamma poles.
  if (!(k - alpha + 1.0 > 0.0) || !(k + alpha - 1.0 > 0.0)) {
    throw ConfigError("divergence.alpha", "k - alpha + 1 and k + alpha - 1 must be positive");
  }
}

double BCoefficient(int k, double alpha) {
  const double a = k - alpha + 1.0;
  const double b = k + alpha - 1.0;
  if (k < 1 || !(a > 0.0) || !(b > 0.0)) {
    throw Error("B coefficient undefined: gamma pole at k=" + std::to_string(k) +
                ", alpha=" + std::to_string(alpha));
  }
  return std::exp(2.0 * std::lgamma(static_cast<double>(k)) - std::lgamma(a) - std::lgamma(b));
}

void ApplyJitter(std::span<double> pooled, double jitter_scale, uint64_t seed) {
  if (pooled.empty() || jitter_scale == 0.0) return;
  const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
  const double s = jitter_scale * (*hi - *lo);
  if (s == 0.0) return;
  Rng rng(DeriveSeed(seed, "jitter"));
  for (double& v : pooled) v += rng.Uniform(-s, s);
}

double RenyiFromDistances(std::span<const double> rho, std::span<const double> nu, size_t n0,
                          size_t n1, int dim, const DivergenceConfig& config) {
  const double alpha = config.alpha;
  const double log_ratio = std::log(static_cast<double>(n0 - 1) / static_cast<double>(n1));
  // log-sum-exp over (1 - alpha) * log(((n0-1)/n1) * (rho/nu)^d).
  std::vector<double> terms(rho.size());
  double top = -INFINITY;
  for (size_t i = 0; i < rho.size(); ++i) {
    if (!(rho[i] > 0.0) || !(nu[i] > 0.0)) {
      throw DegenerateInputError("degenerate pool: zero nearest-neighbour distance");
    }
    terms[i] = (1.0 - alpha) * (log_ratio + dim * (std::log(rho[i]) - std::log(nu[i])));
    top = std::max(top, terms[i]);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  const double log_mean = top + std::log(sum / static_cast<double>(rho.size()));
  const double log_b = std::log(BCoefficient(config.k, alpha));
  const double estimate = (log_mean + log_b) / (alpha - 1.0);
  if (!std::isfinite(estimate)) throw DegenerateInputError("degenerate pool: non-finite estimate");
  return estimate;
}

namespace {

void CheckPools(size_t n0, size_t n1, int k) {
  if (n0 <= static_cast<size_t>(k) || n1 <= static_cast<size_t>(k)) {
    throw DegenerateInputError("degenerate pool: pool sizes " + std::to_string(n0) + " and " +
                               std::to_string(n1) + " must exceed k=" + std::to_string(k));
  }
}

}  // namespace

double RenyiDivergenceSorted(std::span<const double> p_sorted, std::span<const double> q_sorted,
                             const DivergenceConfig& config) {
  CheckPools(p_sorted.size(), q_sorted.size(), config.k);
  const std::vector<double> rho = KnnDistancesSorted1d(p_sorted, p_sorted, config.k, true);
  const std::vector<double> nu = KnnDistancesSorted1d(p_sorted, q_sorted, config.k, false);
  return RenyiFromDistances(rho, nu, p_sorted.size(), q_sorted.size(), 1, config);
}

double RenyiDivergence(std::span<const double> p, std::span<const double> q,
                       const DivergenceConfig& config) {
  config.Validate();
  CheckPools(p.size(), q.size(), config.k);
  std::vector<double> pooled(p.begin(), p.end());
  pooled.insert(pooled.end(), q.begin(), q.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw DegenerateInputError("degenerate pool: non-finite value");
  }
  ApplyJitter(pooled, config.jitter_scale, config.jitter_seed);
  std::vector<double> ps(pooled.begin(), pooled.begin() + static_cast<ptrdiff_t>(p.size()));
  std::vector<double> qs(pooled.begin() + static_cast<ptrdiff_t>(p.size()), pooled.end());
  std::sort(ps.begin(), ps.end());
  std::sort(qs.begin(), qs.end());
  return RenyiDivergenceSorted(ps, qs, config);
}

double RenyiDivergence(const PointSet& p, const PointSet& q, const DivergenceConfig& config) {
  config.Validate();
  if (p.dim != q.dim) throw ShapeError("pools have different dimensions");
  CheckPools(p.size(), q.size(), config.k);
  const std::vector<double> rho = KnnDistances(p, p, config.k, true);
  const std::vector<double> nu = KnnDistances(p, q, config.k, false);
  return RenyiFromDistances(rho, nu, p.size(), q.size(), p.dim, config);
}

}  // namespace msunet::stats
