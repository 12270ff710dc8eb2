#include "msunet/nn/segnet.h"

#include <cmath>
#include <sstream>

#include "msunet/error.h"
#include "msunet/nn/ops.h"

namespace msunet::nn {

float SigmoidF(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

void MiniSegNetConfig::Validate() const {
  if (in_channels < 1) throw ConfigError("in_channels", "must be >= 1");
  if (base_channels < 1) throw ConfigError("base_channels", "must be >= 1");
  if (depth < 1) throw ConfigError("depth", "must be >= 1");
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) throw ConfigError("dropout_rate", "must lie in [0, 1)");
  if (!level_dropout_rates.empty() && static_cast<int>(level_dropout_rates.size()) != depth) {
    throw ConfigError("level_dropout_rates", "needs exactly `depth` entries");
  }
  for (float r : level_dropout_rates) {
    if (!(r >= 0.0f && r < 1.0f)) throw ConfigError("level_dropout_rates", "rates must lie in [0, 1)");
  }
}

float MiniSegNetConfig::DropoutForLevel(int level) const {
  if (level_dropout_rates.empty()) return dropout_rate;
  return level_dropout_rates[static_cast<size_t>(level)];
}

// Dropout rates do not change the parameter layout, so they are not part
// of the fingerprint.
std::string MiniSegNetConfig::Fingerprint() const {
  std::ostringstream s;
  s << "minisegnet/v1/in" << in_channels << "/base" << base_channels << "/depth" << depth
    << "/att" << (use_attention ? 1 : 0);
  return s.str();
}

const Parameter* ModelWeights::Find(const std::string& name) const {
  for (const Parameter& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

size_t ModelWeights::TrainableCount() const {
  size_t n = 0;
  for (const Parameter& p : params) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

MiniSegNet::MiniSegNet(MiniSegNetConfig config, uint64_t init_seed) : config_(std::move(config)) {
  config_.Validate();
  Init(init_seed);
}

MiniSegNet::MiniSegNet(MiniSegNetConfig config, ModelWeights weights) : config_(std::move(config)) {
  config_.Validate();
  Init(0);
  if (weights.fingerprint != weights_.fingerprint) {
    throw Error("weights fingerprint '" + weights.fingerprint + "' does not match '" +
                weights_.fingerprint + "'");
  }
  for (Parameter& p : weights_.params) {
    const Parameter* src = weights.Find(p.name);
    if (src == nullptr) throw Error("weights missing parameter " + p.name);
    if (src->value.shape() != p.value.shape()) {
      throw ShapeError("parameter " + p.name + " has shape " + ShapeString(src->value.shape()) +
                       ", expected " + ShapeString(p.value.shape()));
    }
    p.value = src->value;
  }
}

int MiniSegNet::AddParam(const std::string& name, Shape shape, bool trainable, float fill) {
  Parameter p;
  p.name = name;
  p.value = Tensor(shape, fill);
  if (trainable) p.grad = Tensor(std::move(shape), 0.0f);
  p.trainable = trainable;
  weights_.params.push_back(std::move(p));
  return static_cast<int>(weights_.params.size() - 1);
}

int MiniSegNet::AddKaiming(const std::string& name, Shape shape, Rng& rng) {
  const int idx = AddParam(name, shape, true, 0.0f);
  const int fan_in = shape[1] * shape[2] * shape[3];
  const double bound = std::sqrt(6.0 / fan_in);
  for (float& w : weights_.params[static_cast<size_t>(idx)].value.storage()) {
    w = static_cast<float>(rng.Uniform(-bound, bound));
  }
  return idx;
}

MiniSegNet::ConvBn MiniSegNet::AddConvBn(const std::string& prefix, int cin, int cout, Rng& rng) {
  ConvBn l;
  l.weight = AddKaiming(prefix + ".conv.weight", {cout, cin, 3, 3}, rng);
  l.gamma = AddParam(prefix + ".bn.gamma", {cout}, true, 1.0f);
  l.beta = AddParam(prefix + ".bn.beta", {cout}, true, 0.0f);
  l.mean = AddParam(prefix + ".bn.running_mean", {cout}, false, 0.0f);
  l.var = AddParam(prefix + ".bn.running_var", {cout}, false, 1.0f);
  return l;
}

void MiniSegNet::Init(uint64_t seed) {
  Rng rng(seed);
  weights_.fingerprint = config_.Fingerprint();
  weights_.params.clear();
  encoder_.clear();
  decoder_.clear();
  const int base = config_.base_channels;
  auto ch = [&](int level) { return base << level; };

  int cin = config_.in_channels;
  for (int l = 0; l < config_.depth; ++l) {
    const std::string p = "enc" + std::to_string(l);
    ConvBn a = AddConvBn(p + ".block1", cin, ch(l), rng);
    ConvBn b = AddConvBn(p + ".block2", ch(l), ch(l), rng);
    encoder_.emplace_back(a, b);
    cin = ch(l);
  }
  bottleneck_.first = AddConvBn("bottleneck.block1", cin, ch(config_.depth), rng);
  bottleneck_.second = AddConvBn("bottleneck.block2", ch(config_.depth), ch(config_.depth), rng);

  decoder_.resize(static_cast<size_t>(config_.depth));
  for (int l = config_.depth - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    DecoderLevel& d = decoder_[static_cast<size_t>(l)];
    const int g = ch(l + 1), x = ch(l);
    if (config_.use_attention) {
      const int inter = std::max(x / 2, 1);
      d.gate.wg = AddKaiming(p + ".gate.wg", {inter, g, 1, 1}, rng);
      d.gate.bg = AddParam(p + ".gate.bg", {inter}, true, 0.0f);
      d.gate.wx = AddKaiming(p + ".gate.wx", {inter, x, 1, 1}, rng);
      d.gate.psi_w = AddKaiming(p + ".gate.psi_w", {1, inter, 1, 1}, rng);
      d.gate.psi_b = AddParam(p + ".gate.psi_b", {1}, true, 0.0f);
    }
    d.conv1 = AddConvBn(p + ".block1", g + x, x, rng);
    d.conv2 = AddConvBn(p + ".block2", x, x, rng);
  }
  head_w_ = AddKaiming("head.logit.weight", {1, base, 1, 1}, rng);
  head_b_ = AddParam("head.logit.bias", {1}, true, 0.0f);
  var_w_ = AddKaiming("head.log_var.weight", {1, base, 1, 1}, rng);
  var_b_ = AddParam("head.log_var.bias", {1}, true, 0.0f);
}

void MiniSegNet::CheckInput(const Tensor& batch) const {
  if (batch.rank() != 4) {
    throw ShapeError("enc0.block1: expected NCHW input, got " + ShapeString(batch.shape()));
  }
  if (batch.dim(1) != config_.in_channels) {
    throw ShapeError("enc0.block1: expected " + std::to_string(config_.in_channels) +
                     " input channels, got " + std::to_string(batch.dim(1)));
  }
  const int factor = 1 << config_.depth;
  for (int l = 0; l < config_.depth; ++l) {
    const int scale = 1 << l;
    if ((batch.dim(2) / scale) % 2 != 0 || (batch.dim(3) / scale) % 2 != 0 ||
        batch.dim(2) % factor != 0 || batch.dim(3) % factor != 0) {
      throw ShapeError("enc" + std::to_string(l) + ".pool: spatial size " +
                       std::to_string(batch.dim(2)) + "x" + std::to_string(batch.dim(3)) +
                       " is not divisible by " + std::to_string(factor));
    }
  }
}

Var MiniSegNet::ApplyConvBn(Tape& tape, Var x, const ConvBn& l, bool bn_training) {
  Var y = Conv2d(tape, x, Leaf(tape, l.weight), Var{}, 1);
  Parameter& mean = weights_.params[static_cast<size_t>(l.mean)];
  Parameter& var = weights_.params[static_cast<size_t>(l.var)];
  y = BatchNorm2d(tape, y, Leaf(tape, l.gamma), Leaf(tape, l.beta), mean.value, var.value, bn_training);
  return Relu(tape, y);
}

MiniSegNet::Encoded MiniSegNet::Encode(Tape& tape, Var input, bool bn_training) {
  CheckInput(tape.value(input));
  Encoded enc;
  Var x = input;
  for (const auto& [a, b] : encoder_) {
    x = ApplyConvBn(tape, x, a, bn_training);
    x = ApplyConvBn(tape, x, b, bn_training);
    enc.skips.push_back(x);
    x = MaxPool2(tape, x);
  }
  x = ApplyConvBn(tape, x, bottleneck_.first, bn_training);
  enc.bottom = ApplyConvBn(tape, x, bottleneck_.second, bn_training);
  return enc;
}

MiniSegNet::Heads MiniSegNet::Decode(Tape& tape, const Encoded& enc, bool bn_training,
                                     bool dropout_active, Rng* rng) {
  Var x = enc.bottom;
  for (int l = config_.depth - 1; l >= 0; --l) {
    const DecoderLevel& d = decoder_[static_cast<size_t>(l)];
    Var up = Upsample2(tape, x);
    Var skip = enc.skips[static_cast<size_t>(l)];
    if (config_.use_attention) {
      Var g = Conv2d(tape, up, Leaf(tape, d.gate.wg), Leaf(tape, d.gate.bg), 0);
      Var s = Conv2d(tape, skip, Leaf(tape, d.gate.wx), Var{}, 0);
      Var a = Relu(tape, Add(tape, g, s));
      Var psi = Sigmoid(tape, Conv2d(tape, a, Leaf(tape, d.gate.psi_w), Leaf(tape, d.gate.psi_b), 0));
      skip = MulChannelBroadcast(tape, skip, psi);
    }
    x = Concat(tape, up, skip);
    const float rate = dropout_active ? config_.DropoutForLevel(l) : 0.0f;
    x = Dropout(tape, ApplyConvBn(tape, x, d.conv1, bn_training), rate, rng);
    x = Dropout(tape, ApplyConvBn(tape, x, d.conv2, bn_training), rate, rng);
  }
  Heads h;
  h.logits = Conv2d(tape, x, Leaf(tape, head_w_), Leaf(tape, head_b_), 0);
  h.log_var = Conv2d(tape, x, Leaf(tape, var_w_), Leaf(tape, var_b_), 0);
  return h;
}

MiniSegNet::Heads MiniSegNet::Build(Tape& tape, Var input, bool bn_training, bool dropout_active,
                                    Rng* rng) {
  Encoded enc = Encode(tape, input, bn_training);
  return Decode(tape, enc, bn_training, dropout_active, rng);
}

ForwardOutput MiniSegNet::Forward(const Tensor& batch, bool dropout_active, Rng* rng) {
  Tape tape(/*record=*/false);
  Heads h = Build(tape, tape.Constant(batch), /*bn_training=*/false, dropout_active, rng);
  const int n = batch.dim(0), hh = batch.dim(2), ww = batch.dim(3);
  ForwardOutput out;
  out.logits = tape.value(h.logits).Reshaped({n, hh, ww});
  out.log_var = tape.value(h.log_var).Reshaped({n, hh, ww});
  return out;
}

}  // namespace msunet::nn
