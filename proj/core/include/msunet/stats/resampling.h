#ifndef MSUNET_STATS_RESAMPLING_H_
#define MSUNET_STATS_RESAMPLING_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msunet/stats/renyi.h"

namespace msunet::stats {

inline constexpr int kDefaultReplicates = 1000;
inline constexpr double kDefaultGamma = 0.8;

struct PermutationResult {
  double observed = 0.0;
  double p_value = 1.0;
  int exceed_count = 0;
  int replicates = 0;
};

// Label-permutation test of the divergence estimate. The pooled sample
// [p; q] is jittered once; each replicate draws a size-preserving split
// from its own pre-assigned stream, and p = (1 + #{R_b >= R_obs}) / (B + 1).
PermutationResult PermutationTest(std::span<const double> p, std::span<const double> q,
                                  int replicates, const DivergenceConfig& config, uint64_t seed,
                                  int threads = 1);

struct MoonSizes {
  long n_star = 0;
  long n0_star = 0;
  long n1_star = 0;
};

MoonSizes MoonSampleSizes(size_t n0, size_t n1, double gamma);

// M-out-of-N bootstrap of the divergence estimate. Every replicate
// resamples both pools with replacement at the reduced sizes and is
// re-jittered from its own stream (resampling reintroduces exact ties).
std::vector<double> MoonBootstrap(std::span<const double> p, std::span<const double> q,
                                  double gamma, int replicates, const DivergenceConfig& config,
                                  uint64_t seed, int threads = 1);

// Linear interpolation between order statistics, q in [0, 1].
double Quantile(std::span<const double> sorted, double q);
std::pair<double, double> PercentileCi(std::span<const double> samples, double level = 0.95);

struct DeltaMu {
  double mu_correct = 0.0;
  double mu_incorrect = 0.0;
  double delta = 0.0;  // incorrect - correct
};

DeltaMu ComputeDeltaMu(std::span<const double> correct, std::span<const double> incorrect);

struct DivergenceReport {
  double estimate = 0.0;
  double p_value = 1.0;
  int replicates = 0;
  double gamma = kDefaultGamma;
  double ci_level = 0.95;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  DeltaMu delta_mu;
  size_t n_correct = 0;
  size_t n_incorrect = 0;
  DivergenceConfig config;
  std::vector<double> bootstrap;
};

// Runs the full analysis on (correct, incorrect) pools: estimate,
// permutation p-value, MooN bootstrap, percentile CI and mean shift.
DivergenceReport AnalyzePools(std::span<const double> correct, std::span<const double> incorrect,
                              const DivergenceConfig& config, double gamma, int replicates,
                              double ci_level, uint64_t seed, int threads = 1);

// Bootstrap samples are omitted from the JSON (see BootstrapCsv).
std::string DivergenceReportToJson(const DivergenceReport& report);
DivergenceReport DivergenceReportFromJson(const std::string& json);
std::string BootstrapCsv(std::span<const double> samples);

}  // namespace msunet::stats

#endif  // MSUNET_STATS_RESAMPLING_H_
