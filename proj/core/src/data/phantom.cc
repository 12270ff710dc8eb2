#include "msunet/data/phantom.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "msunet/data/image_io.h"
#include "msunet/error.h"
#include "msunet/parallel.h"
#include "msunet/rng.h"

namespace msunet::data {
namespace {

using nlohmann::json;

constexpr float kLumenIntensity = 0.08f;
constexpr float kRimIntensity = 0.85f;
constexpr int kPlacementAttempts = 200;

bool Overlaps(const Vessel& a, const Vessel& b) {
  const double ra = std::max(a.rx, a.ry) + kRimWidth + 1.0;
  const double rb = std::max(b.rx, b.ry) + kRimWidth + 1.0;
  return std::hypot(a.cx - b.cx, a.cy - b.cy) < ra + rb;
}

bool Fits(const Vessel& v, int size) {
  return v.cx - v.rx >= 1.0 && v.cx + v.rx <= size - 1.0 && v.cy - v.ry >= 1.0 &&
         v.cy + v.ry <= size - 1.0;
}

Vessel DrawShape(const PhantomConfig& c, Rng& rng) {
  const double r = rng.Uniform(c.vessel_radius_min, c.vessel_radius_max) * c.image_size;
  // Area-preserving eccentricity: rx * ry == r^2.
  const double s = rng.Uniform(1.0, 1.25);
  Vessel v;
  v.rx = r * s;
  v.ry = r / s;
  return v;
}

// Centres are drawn inside the ROI band so vessels are evaluated.
bool PlaceRandomly(const PhantomConfig& c, Rng& rng, Vessel& v) {
  const double size = c.image_size;
  const double y_lo = std::max(size * 0.25, v.ry + 1.0);
  const double y_hi = std::min(size * 0.75, size - v.ry - 1.0);
  const double x_lo = v.rx + 1.0, x_hi = size - v.rx - 1.0;
  if (y_lo > y_hi || x_lo > x_hi) return false;
  v.cx = rng.Uniform(x_lo, x_hi);
  v.cy = rng.Uniform(y_lo, y_hi);
  return true;
}

bool PlaceAdjacent(const PhantomConfig& c, Rng& rng, const Vessel& anchor, Vessel& v) {
  const double gap = rng.Uniform(kAdjacentGapMin, kAdjacentGapMax);
  const bool right_first = rng.Bernoulli(0.5);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const bool right = (attempt == 0) == right_first;
    Vessel cand = v;
    cand.cy = anchor.cy;
    cand.cx = right ? anchor.cx + anchor.rx + gap + v.rx : anchor.cx - anchor.rx - gap - v.rx;
    if (Fits(cand, c.image_size)) {
      v = cand;
      return true;
    }
  }
  return false;
}

double EllipseQ(const Vessel& v, double px, double py, double grow) {
  const double dx = (px - v.cx) / (v.rx + grow);
  const double dy = (py - v.cy) / (v.ry + grow);
  return dx * dx + dy * dy;
}

void ValidateRange(bool ok, const char* field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

json ConfigToJsonValue(const PhantomConfig& c) {
  return json{{"image_size", c.image_size},
              {"n_train", c.n_train},
              {"n_vs1", c.n_vs1},
              {"n_vs2", c.n_vs2},
              {"n_test", c.n_test},
              {"vessel_count_range", {c.vessel_count_min, c.vessel_count_max}},
              {"vessel_radius_range", {c.vessel_radius_min, c.vessel_radius_max}},
              {"speckle_sigma", c.speckle_sigma},
              {"adjacency_prob", c.adjacency_prob},
              {"master_seed", c.master_seed}};
}

PhantomConfig ConfigFromJsonValue(const json& j) {
  PhantomConfig c;
  auto get = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(out);
    } catch (const json::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
  get("image_size", c.image_size);
  get("n_train", c.n_train);
  get("n_vs1", c.n_vs1);
  get("n_vs2", c.n_vs2);
  get("n_test", c.n_test);
  get("speckle_sigma", c.speckle_sigma);
  get("adjacency_prob", c.adjacency_prob);
  get("master_seed", c.master_seed);
  auto get_pair = [&](const char* key, auto& lo, auto& hi) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw ConfigError(key, "expected [min, max]");
    try {
      v[0].get_to(lo);
      v[1].get_to(hi);
    } catch (const json::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
  get_pair("vessel_count_range", c.vessel_count_min, c.vessel_count_max);
  get_pair("vessel_radius_range", c.vessel_radius_min, c.vessel_radius_max);
  return c;
}

}  // namespace

void PhantomConfig::Validate() const {
  ValidateRange(image_size >= 16, "image_size", "must be >= 16");
  ValidateRange(image_size % 4 == 0, "image_size", "must be divisible by 4");
  ValidateRange(n_train >= 1, "n_train", "must be >= 1");
  ValidateRange(n_vs1 >= 1, "n_vs1", "must be >= 1 (early stopping needs VS1)");
  ValidateRange(n_vs2 >= 1, "n_vs2", "must be >= 1");
  ValidateRange(n_test >= 1, "n_test", "must be >= 1");
  ValidateRange(vessel_count_min >= 1 && vessel_count_min <= vessel_count_max,
                "vessel_count_range", "need 1 <= min <= max");
  ValidateRange(vessel_radius_min > 0.0 && vessel_radius_max < 0.5 &&
                    vessel_radius_min <= vessel_radius_max,
                "vessel_radius_range", "need 0 < min <= max < 0.5");
  ValidateRange(speckle_sigma >= 0.0 && std::isfinite(speckle_sigma), "speckle_sigma",
                "must be >= 0");
  ValidateRange(adjacency_prob >= 0.0 && adjacency_prob <= 1.0, "adjacency_prob",
                "must lie in [0, 1]");
}

Tensor MakeRoi(int image_size) {
  Tensor roi({image_size, image_size});
  const int top = image_size / 4;
  const int bottom = top + image_size / 2;  // exclusive
  for (int y = top; y < bottom; ++y) {
    for (int x = 0; x < image_size; ++x) roi.at(y, x) = 1.0f;
  }
  return roi;
}

Sample GenerateSample(const PhantomConfig& config, uint64_t sample_seed, std::string id) {
  config.Validate();
  Rng rng(sample_seed);
  const int size = config.image_size;

  const int count = static_cast<int>(rng.UniformRange(config.vessel_count_min, config.vessel_count_max));
  const bool adjacent_pair = count >= 2 && rng.Bernoulli(config.adjacency_prob);

  std::vector<Vessel> vessels;
  for (int i = 0; i < count; ++i) {
    Vessel v = DrawShape(config, rng);
    bool placed = false;
    if (i == 1 && adjacent_pair) placed = PlaceAdjacent(config, rng, vessels[0], v);
    for (int attempt = 0; !placed && attempt < kPlacementAttempts; ++attempt) {
      if (!PlaceRandomly(config, rng, v)) break;
      placed = std::none_of(vessels.begin(), vessels.end(),
                            [&](const Vessel& o) { return Overlaps(o, v); });
    }
    if (placed) vessels.push_back(v);
  }

  Sample s;
  s.id = std::move(id);
  s.image = Tensor({size, size});
  s.mask = Tensor({size, size});
  s.roi = MakeRoi(size);
  for (int y = 0; y < size; ++y) {
    const double py = y + 0.5;
    // Mild depth attenuation of the tissue background.
    const float background = static_cast<float>(0.55 - 0.2 * y / size);
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5;
      float value = background;
      bool lumen = false, rim = false;
      for (const Vessel& v : vessels) {
        if (EllipseQ(v, px, py, 0.0) <= 1.0) lumen = true;
        else if (EllipseQ(v, px, py, kRimWidth) <= 1.0) rim = true;
      }
      if (lumen) value = kLumenIntensity;
      else if (rim) value = kRimIntensity;
      if (config.speckle_sigma > 0.0) value += static_cast<float>(config.speckle_sigma * rng.Normal());
      s.image.at(y, x) = std::clamp(value, 0.0f, 1.0f);
      s.mask.at(y, x) = lumen ? 1.0f : 0.0f;
    }
  }
  s.vessels = std::move(vessels);
  return s;
}

namespace {

struct SplitRange {
  uint64_t first = 0;
  int count = 0;
};

SplitRange RangeOf(const PhantomConfig& config, const std::string& split) {
  const int sizes[] = {config.n_train, config.n_vs1, config.n_vs2, config.n_test};
  uint64_t first = 0;
  for (int s = 0; s < 4; ++s) {
    if (split == kSplitNames[s]) return {first, sizes[s]};
    first += static_cast<uint64_t>(sizes[s]);
  }
  throw ConfigError("split", "unknown split '" + split + "'");
}

std::string SampleId(const std::string& split, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04d", split.c_str(), i);
  return buf;
}

}  // namespace

std::vector<Sample> GenerateSplit(const PhantomConfig& config, const std::string& split,
                                  int threads) {
  config.Validate();
  const SplitRange range = RangeOf(config, split);
  std::vector<Sample> out(static_cast<size_t>(range.count));
  ParallelFor(out.size(), threads, [&](size_t i) {
    out[i] = GenerateSample(config, SampleSeed(config, range.first + i),
                            SampleId(split, static_cast<int>(i)));
  });
  return out;
}

DatasetManifest GenerateDataset(const PhantomConfig& config, const std::filesystem::path& data_dir,
                                int threads) {
  config.Validate();
  DatasetManifest manifest;
  manifest.config = config;

  struct Job {
    std::string split;
    std::string id;
    uint64_t counter;
  };
  std::vector<Job> jobs;
  const int sizes[] = {config.n_train, config.n_vs1, config.n_vs2, config.n_test};
  uint64_t counter = 0;
  for (int s = 0; s < 4; ++s) {
    auto& ids = manifest.splits[kSplitNames[s]];
    for (int i = 0; i < sizes[s]; ++i) {
      const std::string id = SampleId(kSplitNames[s], i);
      ids.push_back(id);
      jobs.push_back({kSplitNames[s], id, counter++});
    }
  }

  std::error_code ec;
  for (const char* split : kSplitNames) {
    std::filesystem::create_directories(data_dir / split, ec);
    if (ec) throw IoError("cannot create " + (data_dir / split).string() + ": " + ec.message());
  }

  ParallelFor(jobs.size(), threads, [&](size_t i) {
    const Job& job = jobs[i];
    const Sample s = GenerateSample(config, SampleSeed(config, job.counter), job.id);
    WritePgm(data_dir / job.split / (job.id + ".pgm"), s.image);
    WritePgm(data_dir / job.split / (job.id + ".mask.pgm"), s.mask);
  });
  WritePgm(data_dir / "roi.pgm", MakeRoi(config.image_size));

  const auto manifest_path = data_dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  out << ManifestToJson(manifest);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  return manifest;
}

std::string PhantomConfigToJson(const PhantomConfig& config) {
  return ConfigToJsonValue(config).dump(2);
}

PhantomConfig PhantomConfigFromJson(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("phantom", e.what());
  }
  return ConfigFromJsonValue(j);
}

std::string ManifestToJson(const DatasetManifest& manifest) {
  json splits = json::object();
  for (const auto& [name, ids] : manifest.splits) splits[name] = ids;
  json j{{"version", manifest.version},
         {"config", ConfigToJsonValue(manifest.config)},
         {"splits", splits}};
  return j.dump(2) + "\n";
}

DatasetManifest ManifestFromJson(std::string_view text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.version = j.at("version").get<int>();
    m.config = ConfigFromJsonValue(j.at("config"));
    for (const auto& [name, ids] : j.at("splits").items()) {
      m.splits[name] = ids.get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

DatasetManifest LoadManifest(const std::filesystem::path& data_dir) {
  const auto path = data_dir / "manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ManifestFromJson(ss.str());
}

std::vector<Sample> LoadSplit(const std::filesystem::path& data_dir, const DatasetManifest& manifest,
                              const std::string& split) {
  const auto it = manifest.splits.find(split);
  if (it == manifest.splits.end()) throw IoError("manifest has no split '" + split + "'");
  const Tensor roi = ReadPgm(data_dir / "roi.pgm");
  std::vector<Sample> out;
  out.reserve(it->second.size());
  for (const std::string& id : it->second) {
    Sample s;
    s.id = id;
    s.image = ReadPgm(data_dir / split / (id + ".pgm"));
    s.mask = ReadPgm(data_dir / split / (id + ".mask.pgm"));
    s.roi = roi;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace msunet::data
