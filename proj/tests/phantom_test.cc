#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "msunet/data/image_io.h"
#include "msunet/data/phantom.h"
#include "msunet/error.h"
#include "support/temp_dir.h"

namespace msunet::data {
namespace {

using testing::TempDir;

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PhantomConfig SmallConfig() {
  PhantomConfig c;
  c.n_train = 6;
  c.n_vs1 = 3;
  c.n_vs2 = 3;
  c.n_test = 4;
  return c;
}

// Counts pixel centres inside any ellipse, scanning the whole image.
long RasterizedArea(const std::vector<Vessel>& vessels, int size) {
  long n = 0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (const Vessel& v : vessels) {
        const double dx = (x + 0.5 - v.cx) / v.rx, dy = (y + 0.5 - v.cy) / v.ry;
        if (dx * dx + dy * dy <= 1.0) {
          ++n;
          break;
        }
      }
    }
  }
  return n;
}

TEST(PhantomTest, NoiselessSingleVesselMaskMatchesRasterizer) {
  PhantomConfig c;
  c.speckle_sigma = 0.0;
  c.vessel_count_min = c.vessel_count_max = 1;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Sample s = GenerateSample(c, seed);
    ASSERT_EQ(s.vessels.size(), 1u);
    double mask_sum = 0;
    for (float v : s.mask.values()) mask_sum += v;
    EXPECT_EQ(static_cast<long>(mask_sum), RasterizedArea(s.vessels, c.image_size)) << "seed " << seed;
  }
}

TEST(PhantomTest, FixedRadiusAreaNearCircleFormula) {
  PhantomConfig c;
  c.vessel_count_min = c.vessel_count_max = 1;
  c.vessel_radius_min = c.vessel_radius_max = 0.06;
  const double expected = std::numbers::pi * std::pow(0.06 * 64, 2);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Sample s = GenerateSample(c, seed);
    double area = 0;
    for (float v : s.mask.values()) area += v;
    EXPECT_NEAR(area, expected, 0.1 * expected) << "seed " << seed;
  }
}

TEST(PhantomTest, DeterministicPerSeed) {
  const PhantomConfig c;
  const Sample a = GenerateSample(c, 42), b = GenerateSample(c, 42), d = GenerateSample(c, 43);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_FALSE(a.image == d.image);
}

TEST(PhantomTest, SampleInvariants) {
  const PhantomConfig c;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const Sample s = GenerateSample(c, seed);
    EXPECT_EQ(s.image.shape(), s.mask.shape());
    EXPECT_EQ(s.image.shape(), s.roi.shape());
    for (float v : s.image.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
    for (float v : s.mask.values()) EXPECT_TRUE(v == 0.0f || v == 1.0f);
    EXPECT_GE(static_cast<int>(s.vessels.size()), c.vessel_count_min);
    EXPECT_LE(static_cast<int>(s.vessels.size()), c.vessel_count_max);
  }
}

TEST(PhantomTest, LumensAreDarkerThanBackground) {
  PhantomConfig c;
  c.speckle_sigma = 0.0;
  const Sample s = GenerateSample(c, 3);
  double in = 0, out = 0, n_in = 0, n_out = 0;
  for (size_t i = 0; i < s.mask.size(); ++i) {
    if (s.mask.values()[i] == 1.0f) in += s.image.values()[i], ++n_in;
    else out += s.image.values()[i], ++n_out;
  }
  EXPECT_LT(in / n_in, out / n_out);
}

TEST(PhantomTest, AdjacentPairsNearlyTouch) {
  PhantomConfig c;
  c.adjacency_prob = 1.0;
  c.vessel_count_min = c.vessel_count_max = 2;
  int checked = 0;
  for (uint64_t seed = 0; seed < 30; ++seed) {
    const Sample s = GenerateSample(c, seed);
    if (s.vessels.size() < 2) continue;
    const Vessel& a = s.vessels[0];
    const Vessel& b = s.vessels[1];
    if (a.cy != b.cy) continue;
    // Horizontal gap between the ellipse extremes.
    const double gap = std::fabs(b.cx - a.cx) - a.rx - b.rx;
    EXPECT_GE(gap, kAdjacentGapMin - 1e-9);
    EXPECT_LE(gap, kAdjacentGapMax + 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(RoiTest, BandGeometry) {
  const Tensor roi = MakeRoi(64);
  double total = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      EXPECT_EQ(roi.at(y, x), (y >= 16 && y <= 47) ? 1.0f : 0.0f);
      total += roi.at(y, x);
    }
  }
  EXPECT_EQ(total, 2048);
  EXPECT_EQ(total / (64 * 64), 0.5);
  const Tensor small = MakeRoi(16);
  for (int y = 0; y < 16; ++y) EXPECT_EQ(small.at(y, 0), (y >= 4 && y <= 11) ? 1.0f : 0.0f);
}

TEST(ConfigTest, ValidationNamesField) {
  PhantomConfig c;
  c.n_vs1 = 0;
  try {
    c.Validate();
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "n_vs1");
  }
  c = {};
  c.image_size = 8;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = {};
  c.vessel_radius_max = 0.5;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = {};
  c.speckle_sigma = -0.1;
  EXPECT_THROW(c.Validate(), ConfigError);
}

TEST(ConfigTest, JsonRoundTrip) {
  PhantomConfig c;
  c.n_train = 17;
  c.speckle_sigma = 0.05;
  c.master_seed = 1234567890123ULL;
  const PhantomConfig back = PhantomConfigFromJson(PhantomConfigToJson(c));
  EXPECT_EQ(PhantomConfigToJson(back), PhantomConfigToJson(c));
}

TEST(DatasetTest, DefaultSplitCounts) {
  // Counting only; the on-disk path is exercised below on a small config.
  const PhantomConfig c;
  EXPECT_EQ(c.n_train + c.n_vs1 + c.n_vs2 + c.n_test, 512);
}

TEST(DatasetTest, WritesDisjointSplitsAndIsReproducible) {
  TempDir a("phantom-a"), b("phantom-b");
  const PhantomConfig c = SmallConfig();
  const DatasetManifest m = GenerateDataset(c, a.path(), 1);
  GenerateDataset(c, b.path(), 3);
  std::set<std::string> ids;
  size_t total = 0;
  for (const auto& [split, list] : m.splits) {
    total += list.size();
    ids.insert(list.begin(), list.end());
    for (const auto& id : list) {
      EXPECT_TRUE(std::filesystem::exists(a / (split + "/" + id + ".pgm")));
      EXPECT_EQ(Slurp(a / (split + "/" + id + ".pgm")), Slurp(b / (split + "/" + id + ".pgm")));
      EXPECT_EQ(Slurp(a / (split + "/" + id + ".mask.pgm")), Slurp(b / (split + "/" + id + ".mask.pgm")));
    }
  }
  EXPECT_EQ(total, 16u);
  EXPECT_EQ(ids.size(), total);
  EXPECT_EQ(m.splits.at("vs1").size(), 3u);
  EXPECT_EQ(Slurp(a / "manifest.json"), Slurp(b / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(a / "roi.pgm"));
}

TEST(DatasetTest, SplitGeneratorMatchesDisk) {
  TempDir dir("phantom-split");
  const PhantomConfig c = SmallConfig();
  const DatasetManifest m = GenerateDataset(c, dir.path());
  const std::vector<Sample> disk = LoadSplit(dir.path(), m, "test");
  const std::vector<Sample> mem = GenerateSplit(c, "test");
  ASSERT_EQ(disk.size(), mem.size());
  for (size_t i = 0; i < disk.size(); ++i) {
    EXPECT_EQ(disk[i].id, mem[i].id);
    EXPECT_EQ(disk[i].mask, mem[i].mask);
    for (size_t j = 0; j < disk[i].image.size(); ++j) {
      EXPECT_NEAR(disk[i].image.values()[j], mem[i].image.values()[j], 0.5 / 255 + 1e-6);
    }
  }
  EXPECT_EQ(ManifestToJson(LoadManifest(dir.path())), ManifestToJson(m));
}

TEST(DatasetTest, UnwritableDirectoryReportsPath) {
  TempDir dir("phantom-ro");
  const auto blocker = dir / "file";
  std::ofstream(blocker) << "x";
  try {
    GenerateDataset(SmallConfig(), blocker / "data");
    FAIL() << "expected an error";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("file"), std::string::npos);
  }
}

TEST(ImageIoTest, PfmRoundTripIsExact) {
  TempDir dir("pfm");
  Tensor t({5, 7}, 0.5f);
  EXPECT_NO_THROW(WritePfm(dir / "half.pfm", t));
  EXPECT_EQ(ReadPfm(dir / "half.pfm"), t);
  Tensor r({3, 4});
  for (size_t i = 0; i < r.size(); ++i) r.values()[i] = std::ldexp(static_cast<float>(i) - 5.3f, static_cast<int>(i) - 4);
  WritePfm(dir / "r.pfm", r);
  EXPECT_EQ(ReadImage(dir / "r.pfm"), r);
}

TEST(ImageIoTest, PgmMaskBytes) {
  TempDir dir("pgm");
  Tensor m({2, 2});
  m.values()[1] = 1.0f;
  m.values()[2] = 1.0f;
  WritePgm(dir / "m.pgm", m);
  const std::string bytes = Slurp(dir / "m.pgm");
  const std::string payload = bytes.substr(bytes.size() - 4);
  EXPECT_EQ(payload, std::string("\x00\xff\xff\x00", 4));
  EXPECT_EQ(bytes.substr(0, 2), "P5");
  EXPECT_EQ(ReadPgm(dir / "m.pgm"), m);
}

TEST(ImageIoTest, PgmQuantisation) {
  TempDir dir("pgmq");
  Tensor t({1, 3});
  t.values()[0] = 0.2f;
  t.values()[1] = 0.7f;
  t.values()[2] = 1.0f;
  WritePgm(dir / "t.pgm", t);
  const Tensor back = ReadPgm(dir / "t.pgm");
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(back.values()[i], t.values()[i], 0.5 / 255 + 1e-6);
}

TEST(ImageIoTest, DistinctErrorKinds) {
  TempDir dir("ioerr");
  Tensor t({4, 4}, 0.25f);
  WritePfm(dir / "ok.pfm", t);
  const std::string full = Slurp(dir / "ok.pfm");
  std::ofstream(dir / "trunc.pfm", std::ios::binary) << full.substr(0, full.size() - 5);
  std::ofstream(dir / "magic.pfm", std::ios::binary) << "P9\n4 4\n255\n";
  std::ofstream(dir / "header.pgm", std::ios::binary) << "P5\nfour 4\n255\n";
  auto kind_of = [&](const std::string& name) {
    try {
      ReadImage(dir / name);
    } catch (const ImageIoError& e) {
      return e.kind();
    }
    return ImageIoErrorKind::kWriteFailed;
  };
  EXPECT_EQ(kind_of("trunc.pfm"), ImageIoErrorKind::kTruncatedPayload);
  EXPECT_EQ(kind_of("magic.pfm"), ImageIoErrorKind::kUnsupportedMagic);
  EXPECT_EQ(kind_of("header.pgm"), ImageIoErrorKind::kMalformedHeader);
  EXPECT_EQ(kind_of("missing.pfm"), ImageIoErrorKind::kOpenFailed);
  EXPECT_STREQ(ToString(ImageIoErrorKind::kTruncatedPayload), "truncated payload");
  try {
    ReadPfm(dir / "trunc.pfm");
    FAIL();
  } catch (const ImageIoError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos);
  }
}

}  // namespace
}  // namespace msunet::data
