#include "msunet/stats/kde.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "msunet/error.h"
#include "msunet/rng.h"
#include "msunet/stats/resampling.h"

namespace msunet::stats {
namespace {

// Kernel contributions beyond this many bandwidths are below 1e-14.
constexpr double kCutoff = 8.0;

}  // namespace

double SilvermanBandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw DegenerateInputError("degenerate sample: need at least 2 values");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw DegenerateInputError("degenerate sample: zero spread");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = Quantile(sorted, 0.75) - Quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

std::vector<double> Kde(std::span<const double> samples, std::span<const double> grid,
                        double bandwidth) {
  const double h = bandwidth > 0.0 ? bandwidth : SilvermanBandwidth(samples);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(grid.size());
  for (size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - kCutoff * h);
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), x + kCutoff * h);
    double sum = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double u = (x - *it) / h;
      sum += std::exp(-0.5 * u * u);
    }
    out[g] = sum * norm;
  }
  return out;
}

std::vector<double> Subsample(std::span<const double> samples, size_t cap, uint64_t seed) {
  if (samples.size() <= cap) return {samples.begin(), samples.end()};
  Rng rng(DeriveSeed(seed, "kde-subsample"));
  std::vector<size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.UniformInt(idx.size() - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<double> out(cap);
  for (size_t i = 0; i < cap; ++i) out[i] = samples[idx[i]];
  return out;
}

std::vector<double> LinearGrid(double lo, double hi, size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  for (size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

std::string KdeCsv(std::span<const double> grid, std::span<const double> density) {
  std::ostringstream os;
  os.precision(10);
  os << "x,density\n";
  for (size_t i = 0; i < grid.size() && i < density.size(); ++i) os << grid[i] << ',' << density[i] << '\n';
  return os.str();
}

}  // namespace msunet::stats
