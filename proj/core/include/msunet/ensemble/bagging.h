#ifndef MSUNET_ENSEMBLE_BAGGING_H_
#define MSUNET_ENSEMBLE_BAGGING_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msunet/nn/train.h"

namespace msunet::ensemble {

inline constexpr int kDefaultCandidates = 15;

// M bootstrap resamples of the training indices [0, n_train), each of size
// n_train, drawn with replacement.
struct BagPlan {
  int n_train = 0;
  uint64_t seed = 0;
  std::vector<std::vector<size_t>> bags;

  int candidates() const { return static_cast<int>(bags.size()); }
};

BagPlan MakeBagPlan(int n_train, int candidates, uint64_t seed);

std::string BagPlanToJson(const BagPlan& plan);
BagPlan BagPlanFromJson(const std::string& json);

using CandidateCallback = std::function<void(int candidate, const nn::EpochRecord&)>;

// Trains candidate i on bag i with seed DeriveSeed(config.seed, "candidate", i).
// Candidates run concurrently on up to `threads` workers; each candidate's
// training is sequential, so results do not depend on `threads`.
std::vector<nn::TrainResult> TrainCandidates(const BagPlan& plan,
                                             const nn::MiniSegNetConfig& model_config,
                                             const nn::TrainingSet& train,
                                             const nn::TrainingSet& vs1,
                                             const nn::TrainConfig& train_config, int threads = 1,
                                             const CandidateCallback& on_epoch = {});

uint64_t CandidateSeed(uint64_t train_seed, int candidate);

}  // namespace msunet::ensemble

#endif  // MSUNET_ENSEMBLE_BAGGING_H_
