#ifndef MSUNET_STATS_KDE_H_
#define MSUNET_STATS_KDE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace msunet::stats {

inline constexpr size_t kKdePoolCap = 100000;

// 0.9 * min(sd, IQR / 1.34) * n^(-1/5). Falls back to sd when the IQR is
// zero; throws DegenerateInputError("degenerate sample") for zero spread.
double SilvermanBandwidth(std::span<const double> samples);

// Gaussian kernel density on `grid`. bandwidth <= 0 selects Silverman.
std::vector<double> Kde(std::span<const double> samples, std::span<const double> grid,
                        double bandwidth = 0.0);

// Seeded uniform subsample without replacement (order preserved); returns
// the input unchanged when it already fits.
std::vector<double> Subsample(std::span<const double> samples, size_t cap, uint64_t seed);

std::vector<double> LinearGrid(double lo, double hi, size_t n);

std::string KdeCsv(std::span<const double> grid, std::span<const double> density);

}  // namespace msunet::stats

#endif  // MSUNET_STATS_KDE_H_
