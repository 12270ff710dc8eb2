#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <vector>

#include "msunet/digest.h"
#include "msunet/error.h"
#include "msunet/parallel.h"
#include "msunet/rng.h"
#include "msunet/tensor.h"
#include "support/temp_dir.h"

namespace msunet {
namespace {

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const uint64_t x = a.NextU64();
    EXPECT_EQ(x, b.NextU64());
    c.NextU64();
  }
  EXPECT_NE(Rng(42).NextU64(), Rng(43).NextU64());
}

TEST(RngTest, DeriveSeedSeparatesLabelsAndIndices) {
  std::set<uint64_t> seen;
  for (const char* label : {"bag", "candidate", "phantom"}) {
    for (uint64_t i = 0; i < 50; ++i) seen.insert(DeriveSeed(7, label, i));
  }
  EXPECT_EQ(seen.size(), 150u);
  EXPECT_EQ(DeriveSeed(7, "bag", 3), DeriveSeed(7, "bag", 3));
  EXPECT_NE(DeriveSeed(7, "bag", 3), DeriveSeed(8, "bag", 3));
}

TEST(RngTest, UniformMomentsAndRange) {
  Rng rng(1);
  const int n = 200000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum_sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sum_sq / n - 0.25, 1.0 / 12.0, 0.003);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.Uniform(-2.0, 3.0);
    ASSERT_GE(v, -2.0);
    ASSERT_LT(v, 3.0);
  }
}

TEST(RngTest, UniformIntIsUnbiased) {
  Rng rng(2);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.UniformInt(7)];
  // Chi-square with 6 degrees of freedom; 22.46 is the 0.999 quantile.
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);
  for (int i = 0; i < 1000; ++i) {
    const int64_t v = rng.UniformRange(-3, 3);
    ASSERT_GE(v, -3);
    ASSERT_LE(v, 3);
  }
  EXPECT_EQ(rng.UniformInt(1), 0u);
}

TEST(RngTest, NormalMoments) {
  Rng rng(3);
  const int n = 200000;
  double sum = 0, sum_sq = 0, sum4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.Normal();
    sum += z;
    sum_sq += z * z;
    sum4 += z * z * z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum_sq / n, 1.0, 0.01);
  EXPECT_NEAR(sum4 / n, 3.0, 0.06);
}

TEST(DigestTest, KnownFnv1aVectors) {
  EXPECT_EQ(Digest().value(), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Digest().Update("a").value(), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Digest().Update("foobar").value(), 0x85944171f73967e8ULL);
  EXPECT_EQ(DigestHex("foobar"), "85944171f73967e8");
}

TEST(DigestTest, IncrementalEqualsWholeAndFiles) {
  EXPECT_EQ(Digest().Update("foo").Update("bar").value(), Digest().Update("foobar").value());
  testing::TempDir dir;
  {
    std::ofstream f(dir / "x.bin", std::ios::binary);
    f << "foobar";
  }
  EXPECT_EQ(Digest().UpdateFile(dir / "x.bin").value(), Digest().Update("foobar").value());
  EXPECT_THROW(Digest().UpdateFile(dir / "missing"), IoError);
}

TEST(TensorTest, ShapeAndReshape) {
  Tensor t({2, 3, 4}, 1.5f);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3);
  EXPECT_EQ(t.dim(-1), 4);
  EXPECT_EQ(ShapeString(t.shape()), "[2,3,4]");
  const Tensor r = t.Reshaped({6, 4});
  EXPECT_EQ(r.shape(), (Shape{6, 4}));
  EXPECT_THROW(t.Reshaped({5, 5}), ShapeError);
  EXPECT_THROW(Tensor({2, -1}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(TensorTest, AddFillFinite) {
  Tensor a({2, 2}, 1.0f), b({2, 2}, 2.0f);
  a.Add(b);
  for (float v : a.values()) EXPECT_EQ(v, 3.0f);
  EXPECT_THROW(a.Add(Tensor({4}, 1.0f)), ShapeError);
  EXPECT_TRUE(a.AllFinite());
  a[1] = NAN;
  EXPECT_FALSE(a.AllFinite());
  a.Fill(0.0f);
  EXPECT_EQ(a, Tensor({2, 2}, 0.0f));
  Tensor m({2, 3});
  m.at(1, 2) = 7.0f;
  EXPECT_EQ(m[5], 7.0f);
}

TEST(ParallelForTest, ResultsIndependentOfThreads) {
  for (int threads : {1, 2, 4, 9}) {
    std::vector<uint64_t> out(100);
    ParallelFor(out.size(), threads, [&](size_t i) { out[i] = Rng(DeriveSeed(1, "p", i)).NextU64(); });
    for (size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], Rng(DeriveSeed(1, "p", i)).NextU64());
  }
  ParallelFor(0, 4, [](size_t) { FAIL(); });
}

TEST(ParallelForTest, RethrowsLowestFailingIndex) {
  for (int threads : {1, 3}) {
    try {
      ParallelFor(50, threads, [](size_t i) {
        if (i == 7 || i == 30) throw std::runtime_error("item " + std::to_string(i));
      });
      FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "item 7");
    }
  }
}

TEST(ErrorTest, ConfigErrorCarriesField) {
  const ConfigError e("phantom.n_vs1", "must be >= 1");
  EXPECT_EQ(e.field(), "phantom.n_vs1");
  EXPECT_STREQ(e.what(), "phantom.n_vs1: must be >= 1");
  const Error& base = e;
  EXPECT_NE(dynamic_cast<const ConfigError*>(&base), nullptr);
}

}  // namespace
}  // namespace msunet
