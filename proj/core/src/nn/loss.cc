#include "msunet/nn/loss.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "msunet/error.h"

namespace msunet::nn {

double Softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {
double SigmoidD(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

LossResult AttenuatedBceLoss(const Tensor& logits, const Tensor& log_var, const Tensor& labels,
                             int samples, Rng& rng, AttenuationMode mode, bool want_grad) {
  if (logits.size() != log_var.size() || logits.size() != labels.size()) {
    throw ShapeError("attenuated loss: logits " + ShapeString(logits.shape()) + ", log_var " +
                     ShapeString(log_var.shape()) + ", labels " + ShapeString(labels.shape()));
  }
  if (samples < 1) throw Error("attenuated loss: sample count must be >= 1");
  for (float y : labels.values()) {
    if (y != 0.0f && y != 1.0f) throw Error("attenuated loss: labels must be binary");
  }
  const size_t n = logits.size();
  LossResult r;
  if (want_grad) {
    r.grad_logits = Tensor::ZerosLike(logits);
    r.grad_log_var = Tensor::ZerosLike(log_var);
  }
  std::vector<double> eps(static_cast<size_t>(samples));
  std::vector<double> logp(static_cast<size_t>(samples));
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const double sign = labels[i] > 0.5f ? 1.0 : -1.0;
    const double sigma = std::exp(0.5 * static_cast<double>(log_var[i]));
    // z_s = sign * corrupted logit; log p_s = -softplus(-z_s).
    double max_logp = -INFINITY;
    for (int s = 0; s < samples; ++s) {
      eps[s] = rng.Normal();
      const double z = sign * (logits[i] + sigma * eps[s]);
      logp[s] = -Softplus(-z);
      max_logp = std::max(max_logp, logp[s]);
    }
    double pixel_loss = 0.0;
    double dlogit = 0.0, dsigma = 0.0;
    if (mode == AttenuationMode::kMeanBce) {
      for (int s = 0; s < samples; ++s) {
        pixel_loss -= logp[s];
        if (want_grad) {
          const double z = sign * (logits[i] + sigma * eps[s]);
          const double dz = -SigmoidD(-z);  // d(-log p)/dz
          dlogit += dz * sign;
          dsigma += dz * sign * eps[s];
        }
      }
      pixel_loss /= samples;
      dlogit /= samples;
      dsigma /= samples;
    } else {
      double sum_w = 0.0;
      for (int s = 0; s < samples; ++s) sum_w += std::exp(logp[s] - max_logp);
      pixel_loss = -(max_logp + std::log(sum_w / samples));
      if (want_grad) {
        for (int s = 0; s < samples; ++s) {
          const double w = std::exp(logp[s] - max_logp) / sum_w;
          const double z = sign * (logits[i] + sigma * eps[s]);
          const double dz = -w * SigmoidD(-z);
          dlogit += dz * sign;
          dsigma += dz * sign * eps[s];
        }
      }
    }
    total += pixel_loss;
    if (want_grad) {
      r.grad_logits[i] = static_cast<float>(dlogit * inv_n);
      // d sigma / d log_var = sigma / 2.
      r.grad_log_var[i] = static_cast<float>(dsigma * 0.5 * sigma * inv_n);
    }
  }
  r.loss = total * inv_n;
  return r;
}

}  // namespace msunet::nn
