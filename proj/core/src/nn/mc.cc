#include "msunet/nn/mc.h"

#include <algorithm>
#include <cmath>

#include "msunet/error.h"

namespace msunet::nn {
namespace {

Tensor AsBatch(const Tensor& input) {
  if (input.rank() == 2) return input.Reshaped({1, 1, input.dim(0), input.dim(1)});
  if (input.rank() == 3) return input.Reshaped({1, input.dim(0), input.dim(1), input.dim(2)});
  throw ShapeError("expected [C,H,W] or [H,W] input, got " + ShapeString(input.shape()));
}

// exp() of a log-variance, bounded so the map stays finite.
float SafeExp(float log_var) { return std::exp(std::clamp(log_var, -80.0f, 80.0f)); }

}  // namespace

McOutput McPredict(MiniSegNet& model, const Tensor& input, int passes, Rng& rng, bool keep_logits) {
  if (passes < 1) throw Error("MC pass count must be >= 1");
  const Tensor batch = AsBatch(input);
  const int h = batch.dim(2), w = batch.dim(3);
  const size_t hw = static_cast<size_t>(h) * w;

  McOutput out;
  out.passes = passes;
  out.prob_mean = Tensor({h, w});
  out.epistemic = Tensor({h, w});
  out.logit_variance = Tensor({h, w});
  if (keep_logits) out.per_pass_logits = Tensor({passes, h, w});

  std::vector<double> prob(hw, 0.0), var(hw, 0.0), sum(hw, 0.0), sum_sq(hw, 0.0);
  Tape tape(/*record=*/false);
  const auto enc = model.Encode(tape, tape.Constant(batch), /*bn_training=*/false);
  const size_t mark = tape.size();
  for (int t = 0; t < passes; ++t) {
    const auto heads = model.Decode(tape, enc, /*bn_training=*/false, /*dropout_active=*/true, &rng);
    const Tensor& logits = tape.value(heads.logits);
    const Tensor& log_var = tape.value(heads.log_var);
    for (size_t i = 0; i < hw; ++i) {
      prob[i] += SigmoidF(logits[i]);
      var[i] += SafeExp(log_var[i]);
      sum[i] += logits[i];
      sum_sq[i] += static_cast<double>(logits[i]) * logits[i];
    }
    if (keep_logits) std::copy_n(logits.data(), hw, out.per_pass_logits.data() + t * hw);
    tape.TruncateTo(mark);
  }
  for (size_t i = 0; i < hw; ++i) {
    out.prob_mean[i] = std::clamp(static_cast<float>(prob[i] / passes), 0.0f, 1.0f);
    out.epistemic[i] = static_cast<float>(var[i] / passes);
    const double mean = sum[i] / passes;
    out.logit_variance[i] = static_cast<float>(std::max(0.0, sum_sq[i] / passes - mean * mean));
  }
  return out;
}

Tensor PredictProbabilities(MiniSegNet& model, const Tensor& input) {
  const Tensor batch = AsBatch(input);
  const ForwardOutput f = model.Forward(batch, /*dropout_active=*/false, nullptr);
  Tensor p({batch.dim(2), batch.dim(3)});
  for (size_t i = 0; i < p.size(); ++i) p[i] = SigmoidF(f.logits[i]);
  return p;
}

}  // namespace msunet::nn
