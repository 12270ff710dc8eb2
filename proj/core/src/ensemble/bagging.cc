#include "msunet/ensemble/bagging.h"

#include "json.hpp"
#include "msunet/error.h"
#include "msunet/parallel.h"
#include "msunet/rng.h"

namespace msunet::ensemble {

using nlohmann::json;

BagPlan MakeBagPlan(int n_train, int candidates, uint64_t seed) {
  if (n_train < 1) throw ConfigError("n_train", "bagging needs at least one training item");
  if (candidates < 1) throw ConfigError("candidates", "must be >= 1");
  BagPlan plan;
  plan.n_train = n_train;
  plan.seed = seed;
  plan.bags.resize(static_cast<size_t>(candidates));
  for (int i = 0; i < candidates; ++i) {
    Rng rng(DeriveSeed(seed, "bag", static_cast<uint64_t>(i)));
    auto& bag = plan.bags[static_cast<size_t>(i)];
    bag.resize(static_cast<size_t>(n_train));
    for (size_t& idx : bag) idx = rng.UniformInt(static_cast<uint64_t>(n_train));
  }
  return plan;
}

std::string BagPlanToJson(const BagPlan& plan) {
  json j{{"n_train", plan.n_train}, {"seed", plan.seed}, {"bags", plan.bags}};
  return j.dump() + "\n";
}

BagPlan BagPlanFromJson(const std::string& text) {
  try {
    const json j = json::parse(text);
    BagPlan plan;
    plan.n_train = j.at("n_train").get<int>();
    plan.seed = j.at("seed").get<uint64_t>();
    plan.bags = j.at("bags").get<std::vector<std::vector<size_t>>>();
    return plan;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed bag plan: ") + e.what());
  }
}

uint64_t CandidateSeed(uint64_t train_seed, int candidate) {
  return DeriveSeed(train_seed, "candidate", static_cast<uint64_t>(candidate));
}

std::vector<nn::TrainResult> TrainCandidates(const BagPlan& plan,
                                             const nn::MiniSegNetConfig& model_config,
                                             const nn::TrainingSet& train,
                                             const nn::TrainingSet& vs1,
                                             const nn::TrainConfig& train_config, int threads,
                                             const CandidateCallback& on_epoch) {
  if (static_cast<size_t>(plan.n_train) != train.size()) {
    throw Error("bag plan covers " + std::to_string(plan.n_train) + " items but the training split has " +
                std::to_string(train.size()));
  }
  std::vector<nn::TrainResult> results(plan.bags.size());
  ParallelFor(plan.bags.size(), threads, [&](size_t i) {
    nn::TrainConfig cfg = train_config;
    cfg.seed = CandidateSeed(train_config.seed, static_cast<int>(i));
    const nn::TrainingSet bag = train.Subset(plan.bags[i]);
    nn::EpochCallback cb;
    if (on_epoch) cb = [&, i](const nn::EpochRecord& r) { on_epoch(static_cast<int>(i), r); };
    try {
      results[i] = nn::Train(model_config, bag, vs1, cfg, cb);
    } catch (const NumericError& e) {
      throw NumericError("candidate " + std::to_string(i) + ": " + e.what());
    }
  });
  return results;
}

}  // namespace msunet::ensemble
