#ifndef MSUNET_NN_TRAIN_H_
#define MSUNET_NN_TRAIN_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "msunet/nn/loss.h"
#include "msunet/nn/optim.h"
#include "msunet/nn/segnet.h"

namespace msunet::nn {

struct TrainConfig {
  int batch_size = 8;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 60;
  int patience = 3;
  int attenuation_samples = 10;
  AttenuationMode attenuation = AttenuationMode::kMeanLikelihood;
  uint64_t seed = 0;

  void Validate() const;
  AdamConfig Adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

// Inputs [C, H, W] with binary labels [H, W].
struct TrainingSet {
  std::vector<Tensor> inputs;
  std::vector<Tensor> labels;

  size_t size() const { return inputs.size(); }
  // Stacks the listed items into an [N, C, H, W] batch and [N, 1, H, W] labels.
  std::pair<Tensor, Tensor> Batch(std::span<const size_t> indices) const;
  TrainingSet Subset(std::span<const size_t> indices) const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double vs1_loss = 0.0;
};

// Early-stopping bookkeeping on a validation-loss sequence.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  // Feeds the next epoch's loss; returns true if it is a new best.
  bool Update(double loss);
  bool ShouldStop() const { return since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_loss_ = 0.0;
};

struct TrainResult {
  ModelWeights weights;  // restored from the best VS1 epoch
  std::vector<EpochRecord> history;
  int stopped_epoch = 0;
  int best_epoch = 0;
};

// One optimisation step: stochastic forward (batch-norm batch statistics,
// decoder dropout), attenuated loss, reverse pass, Adam update. Returns the
// loss before the update. Throws NumericError naming batch_id on a
// non-finite loss.
double TrainStep(MiniSegNet& model, Adam& optimizer, const Tensor& batch, const Tensor& labels,
                 const TrainConfig& config, Rng& rng, long batch_id = 0);

// Deterministic-mode loss (running statistics, no dropout) with a fixed
// noise stream, averaged over all pixels of the set.
double EvaluateLoss(MiniSegNet& model, const TrainingSet& set, const TrainConfig& config,
                    uint64_t noise_seed);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains from a seed-deterministic Kaiming-uniform initialisation until
// `patience` consecutive epochs fail to improve the VS1 loss or
// max_epochs is reached, then restores the best-epoch weights.
TrainResult Train(const MiniSegNetConfig& model_config, const TrainingSet& train,
                  const TrainingSet& vs1, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Writes epoch,train_loss,vs1_loss rows.
std::string HistoryCsv(std::span<const EpochRecord> history);

}  // namespace msunet::nn

#endif  // MSUNET_NN_TRAIN_H_
