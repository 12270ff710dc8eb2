#ifndef MSUNET_DATA_PHANTOM_H_
#define MSUNET_DATA_PHANTOM_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "msunet/tensor.h"

namespace msunet::data {

struct PhantomConfig {
  int image_size = 64;
  int n_train = 256;
  int n_vs1 = 64;
  int n_vs2 = 64;
  int n_test = 128;
  int vessel_count_min = 1;
  int vessel_count_max = 3;
  // Lumen radius as a fraction of image_size.
  double vessel_radius_min = 0.06;
  double vessel_radius_max = 0.18;
  double speckle_sigma = 0.15;
  double adjacency_prob = 0.2;
  uint64_t master_seed = 7;

  // Throws ConfigError naming the field.
  void Validate() const;
};

// Axis-aligned elliptical lumen in pixel units. A pixel (x, y) belongs to
// the lumen when its centre (x + 0.5, y + 0.5) satisfies
// ((px - cx) / rx)^2 + ((py - cy) / ry)^2 <= 1.
struct Vessel {
  double cx = 0, cy = 0, rx = 0, ry = 0;
};

struct Sample {
  std::string id;
  Tensor image;  // [H, W], values in [0, 1]
  Tensor mask;   // [H, W], 1 = vessel lumen
  Tensor roi;    // [H, W], 1 = evaluated
  std::vector<Vessel> vessels;  // empty when loaded from disk
};

inline constexpr const char* kSplitNames[] = {"train", "vs1", "vs2", "test"};

struct DatasetManifest {
  int version = 1;
  PhantomConfig config;
  std::map<std::string, std::vector<std::string>> splits;
};

// Wall thickness drawn around each lumen, in pixels.
inline constexpr double kRimWidth = 1.5;
// Boundary gap range for adjacent vessel pairs, in pixels.
inline constexpr double kAdjacentGapMin = 0.5;
inline constexpr double kAdjacentGapMax = 2.0;

// Centred band of height image_size / 2 spanning all columns.
Tensor MakeRoi(int image_size);

// Deterministic in (config, sample_seed).
Sample GenerateSample(const PhantomConfig& config, uint64_t sample_seed, std::string id = {});

// Seed of the counter-th sample (0-based over train, vs1, vs2, test).
inline uint64_t SampleSeed(const PhantomConfig& config, uint64_t counter) {
  return config.master_seed ^ counter;
}

// Generates one split in memory; identical to what GenerateDataset writes
// (up to 8-bit quantisation of the stored images).
std::vector<Sample> GenerateSplit(const PhantomConfig& config, const std::string& split,
                                  int threads = 1);

// Renders all samples plus roi.pgm and manifest.json under data_dir using
// the layout <split>/<id>.pgm, <split>/<id>.mask.pgm.
DatasetManifest GenerateDataset(const PhantomConfig& config,
                                const std::filesystem::path& data_dir, int threads = 1);

std::string PhantomConfigToJson(const PhantomConfig& config);
PhantomConfig PhantomConfigFromJson(std::string_view json);

std::string ManifestToJson(const DatasetManifest& manifest);
DatasetManifest ManifestFromJson(std::string_view json);
DatasetManifest LoadManifest(const std::filesystem::path& data_dir);

// Reads every sample of a split back from disk, in manifest order.
std::vector<Sample> LoadSplit(const std::filesystem::path& data_dir,
                              const DatasetManifest& manifest, const std::string& split);

}  // namespace msunet::data

#endif  // MSUNET_DATA_PHANTOM_H_
