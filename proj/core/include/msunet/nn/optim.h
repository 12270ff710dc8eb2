#ifndef MSUNET_NN_OPTIM_H_
#define MSUNET_NN_OPTIM_H_

#include <vector>

#include "msunet/nn/tape.h"

namespace msunet::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over the trainable entries of a parameter list.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // Applies one update from param.grad, then zeroes the gradients.
  void Step(std::vector<Parameter>& params);
  void ZeroGrad(std::vector<Parameter>& params) const;
  long steps() const { return step_; }

 private:
  AdamConfig config_;
  long step_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace msunet::nn

#endif  // MSUNET_NN_OPTIM_H_
