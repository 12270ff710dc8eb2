#ifndef MSUNET_NN_LOSS_H_
#define MSUNET_NN_LOSS_H_

#include "msunet/rng.h"
#include "msunet/tensor.h"

namespace msunet::nn {

// How the S corrupted-logit samples are reduced per pixel.
//  kMeanLikelihood: -log((1/S) sum_s p(y | logit + sigma * eps_s)), the
//    classification form of learned loss attenuation. Default.
//  kMeanBce: (1/S) sum_s BCE(logit + sigma * eps_s, y).
// Both reduce to plain BCE as sigma -> 0 and coincide for S = 1.
enum class AttenuationMode { kMeanLikelihood, kMeanBce };

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;   // d loss / d logits, same shape as logits
  Tensor grad_log_var;  // d loss / d log_var
};

// Binary cross-entropy with stochastic logit corruption
// logits + exp(log_var / 2) * eps, eps ~ N(0, 1), averaged over all pixels.
// `labels` must be binary. Gradients are skipped when want_grad is false.
LossResult AttenuatedBceLoss(const Tensor& logits, const Tensor& log_var, const Tensor& labels,
                             int samples, Rng& rng,
                             AttenuationMode mode = AttenuationMode::kMeanLikelihood,
                             bool want_grad = true);

// Numerically stable log(1 + exp(x)).
double Softplus(double x);

}  // namespace msunet::nn

#endif  // MSUNET_NN_LOSS_H_
