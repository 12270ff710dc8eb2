#ifndef MSUNET_NN_MC_H_
#define MSUNET_NN_MC_H_

#include "msunet/nn/segnet.h"
#include "msunet/rng.h"
#include "msunet/tensor.h"

namespace msunet::nn {

inline constexpr int kDefaultMcPasses = 30;

struct McOutput {
  Tensor prob_mean;       // [H, W], mean of sigmoid(logit_t)
  Tensor epistemic;       // [H, W], mean of exp(log_var_t)
  Tensor logit_variance;  // [H, W], across-pass variance of logit_t (diagnostic)
  int passes = 0;
  Tensor per_pass_logits;  // [T, H, W] when requested, else empty
};

// T stochastic passes with decoder dropout active and running batch-norm
// statistics. The encoder has no dropout, so it is evaluated once and the
// decoder is replayed T times. `input` is [C, H, W] (or [H, W] for C = 1).
McOutput McPredict(MiniSegNet& model, const Tensor& input, int passes, Rng& rng,
                   bool keep_logits = false);

// Deterministic pass (dropout off): sigmoid probabilities, [H, W].
Tensor PredictProbabilities(MiniSegNet& model, const Tensor& input);

}  // namespace msunet::nn

#endif  // MSUNET_NN_MC_H_
