#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "msunet/error.h"
#include "msunet/rng.h"
#include "msunet/stats/kde.h"
#include "msunet/stats/knn.h"
#include "msunet/stats/renyi.h"
#include "msunet/stats/resampling.h"

namespace msunet::stats {
namespace {

std::vector<double> NormalSample(size_t n, double mean, double sd, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = mean + sd * rng.Normal();
  return v;
}

// O(n^2) k-th neighbour distance.
std::vector<double> BruteKnn(const std::vector<std::vector<double>>& q,
                             const std::vector<std::vector<double>>& r, int k, bool self) {
  std::vector<double> out;
  for (size_t i = 0; i < q.size(); ++i) {
    std::vector<double> d;
    for (size_t j = 0; j < r.size(); ++j) {
      if (self && i == j) continue;
      double s = 0.0;
      for (size_t a = 0; a < q[i].size(); ++a) s += (q[i][a] - r[j][a]) * (q[i][a] - r[j][a]);
      d.push_back(q[i].size() == 1 ? std::fabs(q[i][0] - r[j][0]) : std::sqrt(s));
    }
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    out.push_back(d[static_cast<size_t>(k - 1)]);
  }
  return out;
}

// Direct evaluation of the estimator from brute-force distances.
double BruteRenyi(const std::vector<double>& p, const std::vector<double>& q, int k, double alpha) {
  std::vector<std::vector<double>> pp, qq;
  for (double x : p) pp.push_back({x});
  for (double x : q) qq.push_back({x});
  const auto rho = BruteKnn(pp, pp, k, true);
  const auto nu = BruteKnn(pp, qq, k, false);
  const double n0 = static_cast<double>(p.size()), n1 = static_cast<double>(q.size());
  long double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) sum += std::pow((n0 - 1.0) * rho[i] / (n1 * nu[i]), 1.0 - alpha);
  const double b = std::tgamma(k) * std::tgamma(k) / (std::tgamma(k - alpha + 1) * std::tgamma(k + alpha - 1));
  return std::log(static_cast<double>(sum) / n0 * b) / (alpha - 1.0);
}

TEST(BCoefficientTest, UnitAtAlphaOne) {
  for (int k = 1; k <= 6; ++k) EXPECT_NEAR(BCoefficient(k, 1.0), 1.0, 1e-14);
}

TEST(BCoefficientTest, KFourAlphaPointEightFive) {
  // Gamma(4)^2 / (Gamma(4.15) Gamma(3.85)) from tgamma in long double.
  const long double oracle = std::tgammal(4.0L) * std::tgammal(4.0L) /
                             (std::tgammal(4.15L) * std::tgammal(3.85L));
  EXPECT_NEAR(BCoefficient(4, 0.85), static_cast<double>(oracle), 1e-12);
  EXPECT_NEAR(BCoefficient(4, 0.85), 0.9934, 5e-4);
}

TEST(BCoefficientTest, KOneAlphaHalfIsTwoOverPi) {
  EXPECT_NEAR(BCoefficient(1, 0.5), 2.0 / std::numbers::pi, 1e-12);
}

TEST(BCoefficientTest, PoleRejected) {
  EXPECT_THROW(BCoefficient(1, 2.5), Error);
  EXPECT_THROW(BCoefficient(1, -0.5), Error);
}

TEST(KnnTest, LatticeExcludingSelf) {
  const std::vector<double> x = {0, 1, 2, 3};
  EXPECT_EQ(KnnDistances1d(x, x, 1, true), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(KnnDistances1d(x, x, 2, true), (std::vector<double>{2, 1, 1, 2}));
}

TEST(KnnTest, SinglePointReference) {
  const std::vector<double> x = {0}, y = {5};
  EXPECT_EQ(KnnDistances1d(x, y, 1, false), std::vector<double>{5});
}

TEST(KnnTest, MatchesBruteForce1d) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  std::vector<double> x(200), y(150);
  for (double& v : x) v = nd(gen);
  for (double& v : y) v = nd(gen) * 2.0;
  std::vector<std::vector<double>> xx, yy;
  for (double v : x) xx.push_back({v});
  for (double v : y) yy.push_back({v});
  for (int k : {1, 4, 7}) {
    EXPECT_EQ(KnnDistances1d(x, x, k, true), BruteKnn(xx, xx, k, true)) << "k=" << k;
    EXPECT_EQ(KnnDistances1d(x, y, k, false), BruteKnn(xx, yy, k, false)) << "k=" << k;
  }
}

TEST(KnnTest, DuplicatesCountAsNeighbours) {
  const std::vector<double> x = {1, 1, 1, 4};
  EXPECT_EQ(KnnDistances1d(x, x, 2, true), (std::vector<double>{0, 0, 0, 3}));
}

TEST(KnnTest, KdTreeMatchesBruteForce) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int dim : {2, 3}) {
    std::vector<std::vector<double>> q(200, std::vector<double>(dim)), r(180, std::vector<double>(dim));
    PointSet pq, pr;
    pq.dim = pr.dim = dim;
    for (auto& p : q) {
      for (double& v : p) v = u(gen), pq.coords.push_back(v);
    }
    for (auto& p : r) {
      for (double& v : p) v = u(gen), pr.coords.push_back(v);
    }
    const auto self = KnnDistances(pq, pq, 4, true);
    const auto cross = KnnDistances(pq, pr, 4, false);
    const auto bself = BruteKnn(q, q, 4, true);
    const auto bcross = BruteKnn(q, r, 4, false);
    for (size_t i = 0; i < q.size(); ++i) {
      EXPECT_DOUBLE_EQ(self[i], bself[i]);
      EXPECT_DOUBLE_EQ(cross[i], bcross[i]);
    }
  }
}

TEST(KnnTest, TooFewReferencePointsRejected) {
  const std::vector<double> x = {0, 1, 2};
  EXPECT_THROW(KnnDistances1d(x, x, 3, true), DegenerateInputError);
  EXPECT_NO_THROW(KnnDistances1d(x, x, 3, false));
}

TEST(RenyiTest, MatchesDirectFormula) {
  const auto p = NormalSample(300, 0.0, 1.0, 1);
  const auto q = NormalSample(250, 0.5, 1.5, 2);
  DivergenceConfig cfg;
  cfg.jitter_scale = 0.0;
  EXPECT_NEAR(RenyiDivergence(p, q, cfg), BruteRenyi(p, q, 4, 0.85), 1e-10);
  cfg.k = 2;
  cfg.alpha = 0.6;
  EXPECT_NEAR(RenyiDivergence(p, q, cfg), BruteRenyi(p, q, 2, 0.6), 1e-10);
}

TEST(RenyiTest, GeneralDimensionPathAgreesForScalars) {
  const auto p = NormalSample(200, 0.0, 1.0, 3);
  const auto q = NormalSample(200, 1.0, 1.0, 4);
  DivergenceConfig cfg;
  cfg.jitter_scale = 0.0;
  EXPECT_NEAR(RenyiDivergence(PointSet(1, p), PointSet(1, q), cfg), RenyiDivergence(p, q, cfg), 1e-12);
}

TEST(RenyiTest, SameDistributionNearZero) {
  const auto p = NormalSample(10000, 0.0, 1.0, 10);
  const auto q = NormalSample(10000, 0.0, 1.0, 11);
  EXPECT_LE(std::fabs(RenyiDivergence(p, q, DivergenceConfig{})), 0.05);
}

TEST(RenyiTest, UnitShiftMatchesClosedForm) {
  // D_alpha(N(0,1) || N(1,1)) = alpha * dmu^2 / 2.
  const auto p = NormalSample(10000, 0.0, 1.0, 20);
  const auto q = NormalSample(10000, 1.0, 1.0, 21);
  EXPECT_NEAR(RenyiDivergence(p, q, DivergenceConfig{}), 0.425, 0.1);
}

TEST(RenyiTest, ConsistencyImprovesWithSampleSize) {
  auto median_abs = [](size_t n) {
    std::vector<double> v;
    for (uint64_t s = 0; s < 20; ++s) {
      v.push_back(std::fabs(RenyiDivergence(NormalSample(n, 0, 1, 100 + s), NormalSample(n, 0, 1, 200 + s),
                                            DivergenceConfig{})));
    }
    std::sort(v.begin(), v.end());
    return 0.5 * (v[9] + v[10]);
  };
  EXPECT_LT(median_abs(10000), median_abs(100));
}

TEST(RenyiTest, JitterScaleInvariantOnDistinctData) {
  const auto p = NormalSample(2000, 0.0, 1.0, 30);
  const auto q = NormalSample(2000, 0.7, 1.2, 31);
  DivergenceConfig a, b;
  a.jitter_scale = 1e-9;
  b.jitter_scale = 1e-8;
  EXPECT_NEAR(RenyiDivergence(p, q, a), RenyiDivergence(p, q, b), 1e-6);
}

TEST(RenyiTest, JitterBreaksTies) {
  std::vector<double> p, q;
  for (int i = 0; i < 200; ++i) p.push_back(i % 5), q.push_back(i % 7);
  DivergenceConfig cfg;
  EXPECT_TRUE(std::isfinite(RenyiDivergence(p, q, cfg)));
  cfg.jitter_scale = 0.0;
  EXPECT_THROW(RenyiDivergence(p, q, cfg), DegenerateInputError);
}

TEST(RenyiTest, IdenticalPoolsWithoutJitterAreDegenerate) {
  const std::vector<double> p(50, 2.0), q(50, 2.0);
  DivergenceConfig cfg;
  cfg.jitter_scale = 0.0;
  try {
    RenyiDivergence(p, q, cfg);
    FAIL() << "expected an error";
  } catch (const DegenerateInputError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate pool"), std::string::npos);
  }
}

TEST(RenyiTest, PoolsMustExceedK) {
  const std::vector<double> p = {0, 1, 2, 3}, q = {0, 1, 2, 3, 4};
  EXPECT_THROW(RenyiDivergence(p, q, DivergenceConfig{}), DegenerateInputError);
}

TEST(RenyiTest, ConfigValidation) {
  DivergenceConfig c;
  c.alpha = 1.0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = {};
  c.k = 0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = {};
  c.jitter_scale = -1.0;
  EXPECT_THROW(c.Validate(), ConfigError);
}

TEST(PermutationTest, SeparatedPoolsHitTheFloor) {
  const auto p = NormalSample(500, 0.0, 0.01, 40);
  const auto q = NormalSample(500, 10.0, 0.01, 41);
  const PermutationResult r = PermutationTest(p, q, 1000, DivergenceConfig{}, 7);
  EXPECT_EQ(r.exceed_count, 0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 1001.0);
}

TEST(PermutationTest, NullCalibration) {
  int ok = 0;
  for (uint64_t t = 0; t < 20; ++t) {
    const auto p = NormalSample(300, 0.0, 1.0, 500 + t);
    const auto q = NormalSample(300, 0.0, 1.0, 600 + t);
    if (PermutationTest(p, q, 200, DivergenceConfig{}, 900 + t).p_value >= 0.05) ++ok;
  }
  EXPECT_GE(ok, 18);
}

TEST(PermutationTest, ObservedEqualsEstimator) {
  const auto p = NormalSample(400, 0.0, 1.0, 50);
  const auto q = NormalSample(300, 0.3, 1.0, 51);
  const DivergenceConfig cfg;
  EXPECT_DOUBLE_EQ(PermutationTest(p, q, 5, cfg, 1).observed, RenyiDivergence(p, q, cfg));
}

TEST(PermutationTest, BoundsAndThreadIndependence) {
  const auto p = NormalSample(300, 0.0, 1.0, 60);
  const auto q = NormalSample(200, 0.2, 1.0, 61);
  const auto a = PermutationTest(p, q, 64, DivergenceConfig{}, 3, 1);
  const auto b = PermutationTest(p, q, 64, DivergenceConfig{}, 3, 4);
  EXPECT_EQ(a.exceed_count, b.exceed_count);
  EXPECT_EQ(a.observed, b.observed);
  EXPECT_GE(a.p_value, 1.0 / 65.0);
  EXPECT_LE(a.p_value, 1.0);
}

TEST(MoonSizesTest, AlgorithmArithmetic) {
  const MoonSizes s = MoonSampleSizes(500, 500, 0.8);
  EXPECT_EQ(s.n_star, 251);
  EXPECT_EQ(s.n0_star, 126);
  EXPECT_EQ(s.n1_star, 125);
}

TEST(MoonSizesTest, GammaOneKeepsFullSizes) {
  const MoonSizes s = MoonSampleSizes(400, 400, 1.0);
  EXPECT_EQ(s.n_star, 800);
  EXPECT_EQ(s.n0_star, 400);
  EXPECT_EQ(s.n1_star, 400);
}

TEST(MoonSizesTest, SizesPartitionAndNeverExceedInput) {
  for (size_t n0 : {7u, 50u, 999u}) {
    for (size_t n1 : {5u, 300u, 4000u}) {
      for (double g = 0.05; g <= 1.0; g += 0.05) {
        const MoonSizes s = MoonSampleSizes(n0, n1, g);
        EXPECT_EQ(s.n0_star + s.n1_star, s.n_star);
        EXPECT_LE(s.n_star, static_cast<long>(n0 + n1));
      }
    }
  }
  EXPECT_THROW(MoonSampleSizes(10, 10, 0.0), ConfigError);
  EXPECT_THROW(MoonSampleSizes(10, 10, 1.5), ConfigError);
}

TEST(MoonBootstrapTest, LengthDeterminismAndThreads) {
  const auto p = NormalSample(500, 0.0, 1.0, 70);
  const auto q = NormalSample(500, 1.0, 1.0, 71);
  const auto a = MoonBootstrap(p, q, 0.8, 1000, DivergenceConfig{}, 9, 1);
  const auto b = MoonBootstrap(p, q, 0.8, 1000, DivergenceConfig{}, 9, 3);
  EXPECT_EQ(a.size(), 1000u);
  EXPECT_EQ(a, b);
  for (double v : a) EXPECT_TRUE(std::isfinite(v));
}

TEST(MoonBootstrapTest, GammaTooSmallForK) {
  const auto p = NormalSample(100, 0.0, 1.0, 72);
  const auto q = NormalSample(100, 1.0, 1.0, 73);
  try {
    MoonBootstrap(p, q, 0.3, 10, DivergenceConfig{}, 1);
    FAIL() << "expected an error";
  } catch (const DegenerateInputError& e) {
    EXPECT_NE(std::string(e.what()).find("too small for k"), std::string::npos);
  }
}

TEST(PercentileTest, OneToHundred) {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  const auto [lo, hi] = PercentileCi(s, 0.95);
  EXPECT_NEAR(lo, 3.475, 1e-12);
  EXPECT_NEAR(hi, 97.525, 1e-12);
}

TEST(PercentileTest, ConstantSample) {
  const std::vector<double> s(17, 4.25);
  const auto [lo, hi] = PercentileCi(s);
  EXPECT_EQ(lo, 4.25);
  EXPECT_EQ(hi, 4.25);
}

TEST(PercentileTest, OrderIndependent) {
  std::vector<double> s = {5, 1, 4, 2, 3};
  const auto a = PercentileCi(s, 0.5);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(a, PercentileCi(s, 0.5));
  EXPECT_THROW(PercentileCi(std::vector<double>{}), DegenerateInputError);
}

TEST(KdeTest, StandardNormalPeak) {
  const auto s = NormalSample(100000, 0.0, 1.0, 80);
  const std::vector<double> zero = {0.0};
  EXPECT_NEAR(Kde(s, zero)[0], 1.0 / std::sqrt(2.0 * std::numbers::pi), 0.02);
}

TEST(KdeTest, IntegratesToOne) {
  const auto s = NormalSample(20000, 2.0, 0.5, 81);
  const auto grid = LinearGrid(2.0 - 6 * 0.5, 2.0 + 6 * 0.5, 2001);
  const auto d = Kde(s, grid);
  double integral = 0.0;
  for (size_t i = 1; i < grid.size(); ++i) integral += 0.5 * (d[i] + d[i - 1]) * (grid[i] - grid[i - 1]);
  EXPECT_NEAR(integral, 1.0, 0.01);
}

TEST(KdeTest, SymmetricSamplesGiveSymmetricDensity) {
  auto half = NormalSample(1000, 0.0, 1.0, 82);
  std::vector<double> s = half;
  for (double v : half) s.push_back(-v);
  const auto grid = LinearGrid(-4, 4, 81);
  const auto d = Kde(s, grid);
  for (size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(d[i], d[grid.size() - 1 - i], 1e-12);
}

TEST(KdeTest, RobustSilvermanBandwidth) {
  const auto s = NormalSample(5000, 0.0, 2.0, 83);
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
  double ss = 0;
  for (double v : s) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (s.size() - 1));
  const double iqr = Quantile(sorted, 0.75) - Quantile(sorted, 0.25);
  EXPECT_NEAR(SilvermanBandwidth(s), 0.9 * std::min(sd, iqr / 1.34) * std::pow(5000.0, -0.2), 1e-12);
}

TEST(KdeTest, ZeroSpreadRejected) {
  const std::vector<double> s(10, 1.0);
  try {
    SilvermanBandwidth(s);
    FAIL() << "expected an error";
  } catch (const DegenerateInputError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate sample"), std::string::npos);
  }
}

TEST(KdeTest, SubsampleCapsAndIsSeeded) {
  std::vector<double> s(1000);
  std::iota(s.begin(), s.end(), 0.0);
  const auto a = Subsample(s, 100, 5);
  EXPECT_EQ(a.size(), 100u);
  EXPECT_EQ(a, Subsample(s, 100, 5));
  EXPECT_NE(a, Subsample(s, 100, 6));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(Subsample(s, 5000, 5), s);
}

TEST(DeltaMuTest, Arithmetic) {
  const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  const DeltaMu d = ComputeDeltaMu(a, b);
  EXPECT_DOUBLE_EQ(d.mu_correct, 2.0);
  EXPECT_DOUBLE_EQ(d.mu_incorrect, 5.0);
  EXPECT_DOUBLE_EQ(d.delta, 3.0);
  EXPECT_DOUBLE_EQ(ComputeDeltaMu(a, a).delta, 0.0);
}

TEST(DivergenceReportTest, JsonRoundTripAndAnalysis) {
  const auto p = NormalSample(400, 0.0, 1.0, 90);
  const auto q = NormalSample(300, 1.5, 1.0, 91);
  const DivergenceReport r = AnalyzePools(p, q, DivergenceConfig{}, 0.8, 50, 0.95, 3);
  EXPECT_LE(r.ci_lo, r.ci_hi);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
  EXPECT_EQ(r.bootstrap.size(), 50u);
  const DivergenceReport back = DivergenceReportFromJson(DivergenceReportToJson(r));
  EXPECT_EQ(back.estimate, r.estimate);
  EXPECT_EQ(back.ci_lo, r.ci_lo);
  EXPECT_EQ(back.p_value, r.p_value);
  EXPECT_EQ(back.config.k, 4);
  EXPECT_EQ(back.n_incorrect, 300u);
}

}  // namespace
}  // namespace msunet::stats
