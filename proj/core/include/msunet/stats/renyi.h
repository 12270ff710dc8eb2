#ifndef MSUNET_STATS_RENYI_H_
#define MSUNET_STATS_RENYI_H_

#include <cstdint>
#include <span>
#include <vector>

#include "msunet/stats/knn.h"

namespace msunet::stats {

struct DivergenceConfig {
  int k = 4;
  double alpha = 0.85;
  // Tie-break noise, relative to the pooled data range.
  double jitter_scale = 1e-9;
  uint64_t jitter_seed = 0;

  void Validate() const;
};

// Gamma(k)^2 / (Gamma(k - alpha + 1) Gamma(k + alpha - 1)), via lgamma.
double BCoefficient(int k, double alpha);

// Adds seeded uniform noise in [-s, s] to every value of the pooled sample
// [p; q], s = jitter_scale * range. The concatenation order matters: the
// same pooled vector is used by the permutation test.
void ApplyJitter(std::span<double> pooled, double jitter_scale, uint64_t seed);

// k-NN estimate of the Renyi divergence D_alpha(p || q) for scalar pools.
double RenyiDivergence(std::span<const double> p, std::span<const double> q,
                       const DivergenceConfig& config);

// General-dimension estimate (kd-tree neighbours, no jitter applied).
double RenyiDivergence(const PointSet& p, const PointSet& q, const DivergenceConfig& config);

// Estimator on already jittered, ascending-sorted scalar pools.
double RenyiDivergenceSorted(std::span<const double> p_sorted, std::span<const double> q_sorted,
                             const DivergenceConfig& config);

// Estimator from precomputed k-th neighbour distances rho (within p) and
// nu (p to q).
double RenyiFromDistances(std::span<const double> rho, std::span<const double> nu, size_t n0,
                          size_t n1, int dim, const DivergenceConfig& config);

}  // namespace msunet::stats

#endif  // MSUNET_STATS_RENYI_H_
