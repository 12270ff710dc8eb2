#ifndef MSUNET_NN_SEGNET_H_
#define MSUNET_NN_SEGNET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "msunet/nn/tape.h"
#include "msunet/rng.h"
#include "msunet/tensor.h"

namespace msunet::nn {

struct MiniSegNetConfig {
  int in_channels = 1;
  int base_channels = 8;
  int depth = 2;  // encoder levels; bottleneck sits at 1 / 2^depth resolution
  float dropout_rate = 0.4f;
  // Optional per-decoder-level override, indexed by level (0 = full res).
  std::vector<float> level_dropout_rates;
  bool use_attention = true;

  void Validate() const;
  float DropoutForLevel(int level) const;
  std::string Fingerprint() const;
};

// Learned parameters and batch-norm buffers, in a fixed order.
struct ModelWeights {
  std::string fingerprint;
  std::vector<Parameter> params;

  const Parameter* Find(const std::string& name) const;
  size_t TrainableCount() const;
};

struct ForwardOutput {
  Tensor logits;   // [N, H, W]
  Tensor log_var;  // [N, H, W], log of the predicted logit variance
};

// Encoder-decoder segmentation network:
//  encoder level l:  2 x (conv3x3 -> BN -> ReLU), then 2x2 max-pool
//  bottleneck:       2 x (conv3x3 -> BN -> ReLU)
//  decoder level l:  upsample, attention-gated skip, concat,
//                    2 x (conv3x3 -> BN -> ReLU -> dropout)
//  heads:            1x1 conv to logits and to log-variance
// Dropout exists only in the decoder.
class MiniSegNet {
 public:
  MiniSegNet(MiniSegNetConfig config, uint64_t init_seed);
  MiniSegNet(MiniSegNetConfig config, ModelWeights weights);

  const MiniSegNetConfig& config() const { return config_; }
  ModelWeights& weights() { return weights_; }
  const ModelWeights& weights() const { return weights_; }
  std::vector<Parameter>& params() { return weights_.params; }

  struct Encoded {
    std::vector<Var> skips;
    Var bottom;
  };
  struct Heads {
    Var logits;   // [N, 1, H, W]
    Var log_var;  // [N, 1, H, W]
  };

  // Graph construction on an explicit tape (training and gradient checks).
  // bn_training selects batch statistics (and updates running buffers).
  Encoded Encode(Tape& tape, Var input, bool bn_training);
  Heads Decode(Tape& tape, const Encoded& enc, bool bn_training, bool dropout_active, Rng* rng);
  Heads Build(Tape& tape, Var input, bool bn_training, bool dropout_active, Rng* rng);

  // Inference pass: running batch-norm statistics; dropout applied only
  // when dropout_active. batch is [N, C, H, W].
  ForwardOutput Forward(const Tensor& batch, bool dropout_active, Rng* rng);

  // Validates a batch against the configuration; throws ShapeError naming
  // the layer that would reject it.
  void CheckInput(const Tensor& batch) const;

 private:
  struct ConvBn {
    int weight, gamma, beta, mean, var;
  };
  struct Gate {
    int wg, bg, wx, psi_w, psi_b;
  };
  struct DecoderLevel {
    Gate gate;
    ConvBn conv1, conv2;
  };

  void Init(uint64_t seed);
  ConvBn AddConvBn(const std::string& prefix, int cin, int cout, Rng& rng);
  int AddParam(const std::string& name, Shape shape, bool trainable, float fill);
  int AddKaiming(const std::string& name, Shape shape, Rng& rng);
  Var ApplyConvBn(Tape& tape, Var x, const ConvBn& l, bool bn_training);
  Var Leaf(Tape& tape, int index) { return tape.Leaf(weights_.params[static_cast<size_t>(index)]); }

  MiniSegNetConfig config_;
  ModelWeights weights_;
  std::vector<std::pair<ConvBn, ConvBn>> encoder_;
  std::pair<ConvBn, ConvBn> bottleneck_{};
  std::vector<DecoderLevel> decoder_;  // indexed by level
  int head_w_ = -1, head_b_ = -1, var_w_ = -1, var_b_ = -1;
};

float SigmoidF(float x);

}  // namespace msunet::nn

#endif  // MSUNET_NN_SEGNET_H_
