#ifndef MSUNET_TOOLS_RUN_CONFIG_H_
#define MSUNET_TOOLS_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "msunet/data/phantom.h"
#include "msunet/ensemble/selection.h"
#include "msunet/metrics/segmentation.h"
#include "msunet/nn/segnet.h"
#include "msunet/nn/train.h"
#include "msunet/stats/renyi.h"

namespace msunet::cli {

struct EnsembleConfig {
  int candidates = 15;
  std::string policy = "top_k";
  int top_k = 3;
  double threshold = 0.5;
  bool append_image = false;

  ensemble::SelectionPolicy Policy() const;
};

struct EvalConfig {
  int mc_passes = 30;
  double threshold = 0.5;
  std::string paired_test = "none";
  int kde_grid = 256;
  int kde_cap = 100000;
  int render_images = 4;
};

struct StatsConfig {
  double gamma = 0.8;
  int replicates = 1000;
  double ci_level = 0.95;
};

// The merged configuration tree. One master seed drives every stream; the
// phantom seed and all training seeds are derived from it.
struct RunConfig {
  uint64_t seed = 7;
  data::PhantomConfig phantom;
  nn::MiniSegNetConfig model;
  nn::TrainConfig train;
  EnsembleConfig ensemble;
  EvalConfig eval;
  stats::DivergenceConfig divergence;
  StatsConfig stats;

  // Canonical tree (sorted keys); the source of every config digest.
  nlohmann::json ToJson() const;
  static RunConfig FromJson(const nlohmann::json& tree);
  // Throws ConfigError with a dotted field path.
  void Validate() const;

  // Digest of the named sections (dotted paths) plus the master seed.
  std::string SectionDigest(const std::vector<std::string>& sections) const;
};

// Defaults <- config file <- --seed <- --set key=value (in order). Unknown
// keys and type mismatches raise ConfigError naming the path.
RunConfig LoadRunConfig(const std::filesystem::path& config_file,
                        const std::vector<std::string>& overrides, const uint64_t* seed);

}  // namespace msunet::cli

#endif  // MSUNET_TOOLS_RUN_CONFIG_H_
