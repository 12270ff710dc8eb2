#include "msunet/nn/optim.h"

#include <cmath>

namespace msunet::nn {

void Adam::ZeroGrad(std::vector<Parameter>& params) const {
  for (Parameter& p : params) {
    if (p.trainable) p.grad = Tensor::ZerosLike(p.value);
  }
}

void Adam::Step(std::vector<Parameter>& params) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].value.size(), 0.0f);
      v_[i].assign(params[i].value.size(), 0.0f);
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const float b1 = static_cast<float>(config_.beta1), b2 = static_cast<float>(config_.beta2);
  const float lr = static_cast<float>(config_.learning_rate);
  const float eps = static_cast<float>(config_.epsilon);
  const float inv_bc1 = static_cast<float>(1.0 / bc1), inv_bc2 = static_cast<float>(1.0 / bc2);
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable || p.grad.size() != p.value.size()) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < p.value.size(); ++j) {
      const float g = p.grad[j];
      m[j] = b1 * m[j] + (1.0f - b1) * g;
      v[j] = b2 * v[j] + (1.0f - b2) * g * g;
      const float mhat = m[j] * inv_bc1;
      const float vhat = v[j] * inv_bc2;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  ZeroGrad(params);
}

}  // namespace msunet::nn
