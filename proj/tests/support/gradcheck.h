#ifndef MSUNET_TESTS_SUPPORT_GRADCHECK_H_
#define MSUNET_TESTS_SUPPORT_GRADCHECK_H_

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msunet/nn/tape.h"
#include "msunet/rng.h"
#include "msunet/tensor.h"

namespace msunet::testing {

// A scalar objective recorded on a tape: returns the loss value together
// with d(loss)/d(var) seeds for the vars it was computed from.
struct Objective {
  double loss = 0.0;
  std::vector<std::pair<nn::Var, Tensor>> seeds;
};

using ObjectiveFn = std::function<Objective(nn::Tape&)>;

// Per parameter, the relative error of the whole gradient tensor is
// ||a - n|| / max(||a||, ||n||). The largest element-wise discrepancy is kept
// for diagnostics only.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // parameter with the largest tensor error
  double max_abs_diff = 0.0;
  std::string worst_element;  // "<param>[<index>]"
  size_t checked = 0;
  size_t kinks = 0;  // elements whose perturbation flipped an activation
  std::vector<std::pair<std::string, double>> per_param;
};

inline double RelativeError(std::span<const double> a, std::span<const double> n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// Projects an op output onto fixed random weights so any tensor-valued op
// becomes a scalar objective.
inline Objective Project(nn::Tape& tape, nn::Var out, const Tensor& weights) {
  const Tensor& v = tape.value(out);
  Objective o;
  for (size_t i = 0; i < v.size(); ++i) o.loss += static_cast<double>(v[i]) * weights[i];
  o.seeds.emplace_back(out, weights);
  return o;
}

inline Tensor RandomTensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (float& v : t.values()) v = static_cast<float>(rng.Uniform(lo, hi));
  return t;
}

// Fingerprint of which recorded values are exactly zero. When a ReLU
// switches between the two perturbed passes the fingerprints differ; the
// central difference is then not a derivative estimate, so the element is
// skipped and counted.
inline uint64_t ZeroPattern(const nn::Tape& tape) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t id = 0; id < tape.size(); ++id) {
    const Tensor& v = tape.value(nn::Var{static_cast<int>(id)});
    for (size_t i = 0; i < v.size(); ++i) {
      h ^= (v[i] == 0.0f ? 1u : 2u);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// Compares reverse-mode gradients of `fn` against central differences for
// every element of every parameter. Parameters' grads are overwritten.
inline GradCheckResult CheckGradients(std::vector<nn::Parameter*> params, const ObjectiveFn& fn,
                                      double h = 1e-3) {
  for (nn::Parameter* p : params) p->grad = Tensor::ZerosLike(p->value);
  {
    nn::Tape tape;
    Objective o = fn(tape);
    tape.Backward(o.seeds);
  }
  GradCheckResult result;
  for (nn::Parameter* p : params) {
    std::vector<double> analytic(p->value.size()), numeric(p->value.size());
    for (size_t i = 0; i < p->value.size(); ++i) {
      const float original = p->value[i];
      const float up = static_cast<float>(original + h);
      const float down = static_cast<float>(original - h);
      p->value[i] = up;
      double f_up;
      uint64_t pattern_up;
      {
        nn::Tape tape(/*record=*/false);
        f_up = fn(tape).loss;
        pattern_up = ZeroPattern(tape);
      }
      p->value[i] = down;
      double f_down;
      bool kink;
      {
        nn::Tape tape(/*record=*/false);
        f_down = fn(tape).loss;
        kink = ZeroPattern(tape) != pattern_up;
      }
      p->value[i] = original;
      if (kink) {
        ++result.kinks;
        continue;
      }
      numeric[i] = (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
      analytic[i] = p->grad[i];
      ++result.checked;
      const double diff = std::fabs(analytic[i] - numeric[i]);
      if (diff > result.max_abs_diff) {
        result.max_abs_diff = diff;
        result.worst_element = p->name + "[" + std::to_string(i) + "]";
      }
    }
    const double err = RelativeError(analytic, numeric);
    result.per_param.emplace_back(p->name, err);
    if (err >= result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = p->name;
    }
  }
  return result;
}

}  // namespace msunet::testing

#endif  // MSUNET_TESTS_SUPPORT_GRADCHECK_H_
