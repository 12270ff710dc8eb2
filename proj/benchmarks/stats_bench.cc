#include <benchmark/benchmark.h>

#include <vector>

#include "msunet/rng.h"
#include "msunet/stats/kde.h"
#include "msunet/stats/knn.h"
#include "msunet/stats/renyi.h"
#include "msunet/stats/resampling.h"

namespace msunet::stats {
namespace {

std::vector<double> Gaussian(size_t n, double mean, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = mean + rng.Normal();
  return v;
}

void BM_Knn1d(benchmark::State& state) {
  const auto q = Gaussian(static_cast<size_t>(state.range(0)), 0.0, 1);
  const auto r = Gaussian(static_cast<size_t>(state.range(0)), 0.5, 2);
  for (auto _ : state) benchmark::DoNotOptimize(KnnDistances1d(q, r, 4, false));
}
BENCHMARK(BM_Knn1d)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_KnnKdTree3d(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  PointSet pts{3, Gaussian(3 * n, 0.0, 3)};
  for (auto _ : state) benchmark::DoNotOptimize(KnnDistances(pts, pts, 4, true));
}
BENCHMARK(BM_KnnKdTree3d)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_RenyiDivergence(benchmark::State& state) {
  const auto p = Gaussian(static_cast<size_t>(state.range(0)), 0.0, 4);
  const auto q = Gaussian(static_cast<size_t>(state.range(0)), 1.0, 5);
  const DivergenceConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(RenyiDivergence(p, q, cfg));
}
BENCHMARK(BM_RenyiDivergence)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_PermutationTest(benchmark::State& state) {
  const auto p = Gaussian(5000, 0.0, 6);
  const auto q = Gaussian(5000, 0.2, 7);
  const DivergenceConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(PermutationTest(p, q, static_cast<int>(state.range(0)), cfg, 8, 1));
  }
}
BENCHMARK(BM_PermutationTest)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Kde(benchmark::State& state) {
  const auto s = Gaussian(100000, 0.0, 9);
  const auto grid = LinearGrid(-4.0, 4.0, 256);
  for (auto _ : state) benchmark::DoNotOptimize(Kde(s, grid));
}
BENCHMARK(BM_Kde)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace msunet::stats
