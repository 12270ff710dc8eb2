#ifndef MSUNET_NN_OPS_H_
#define MSUNET_NN_OPS_H_

#include "msunet/nn/tape.h"
#include "msunet/rng.h"

namespace msunet::nn {

// All image tensors are NCHW.

// Stride-1 convolution with square kernel [Cout, Cin, k, k] and zero
// padding `pad`. `bias` may be an invalid Var.
Var Conv2d(Tape& tape, Var x, Var weight, Var bias, int pad);

// Per-channel batch normalisation. In training mode batch statistics are
// used and the running estimates are updated in place (unbiased variance);
// otherwise the running estimates are used.
Var BatchNorm2d(Tape& tape, Var x, Var gamma, Var beta, Tensor& running_mean,
                Tensor& running_var, bool training, float momentum = 0.1f, float eps = 1e-5f);

Var Relu(Tape& tape, Var x);
Var Sigmoid(Tape& tape, Var x);

// Inverted dropout: surviving activations are scaled by 1 / (1 - rate).
// Identity when rate == 0 or rng is null.
Var Dropout(Tape& tape, Var x, float rate, Rng* rng);

Var MaxPool2(Tape& tape, Var x);
// Nearest-neighbour 2x upsampling.
Var Upsample2(Tape& tape, Var x);
// Channel concatenation [a, b].
Var Concat(Tape& tape, Var a, Var b);
Var Add(Tape& tape, Var a, Var b);
// x [N,C,H,W] * gate [N,1,H,W] broadcast over channels.
Var MulChannelBroadcast(Tape& tape, Var x, Var gate);

}  // namespace msunet::nn

#endif  // MSUNET_NN_OPS_H_
