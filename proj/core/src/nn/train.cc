#include "msunet/nn/train.h"

#include <cmath>
#include <numeric>
#include <sstream>

#include "msunet/error.h"
#include "msunet/rng.h"

namespace msunet::nn {

void TrainConfig::Validate() const {
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
  if (max_epochs < 1) throw ConfigError("max_epochs", "must be >= 1");
  if (patience < 1) throw ConfigError("patience", "must be >= 1");
  if (attenuation_samples < 1) throw ConfigError("attenuation_samples", "must be >= 1");
}

std::pair<Tensor, Tensor> TrainingSet::Batch(std::span<const size_t> indices) const {
  if (indices.empty()) throw Error("empty batch");
  const Tensor& first = inputs.at(indices[0]);
  const int c = first.dim(0), h = first.dim(1), w = first.dim(2);
  const size_t in_size = first.size(), lab_size = static_cast<size_t>(h) * w;
  const int n = static_cast<int>(indices.size());
  Tensor x({n, c, h, w});
  Tensor y({n, 1, h, w});
  for (int i = 0; i < n; ++i) {
    const Tensor& in = inputs.at(indices[i]);
    const Tensor& lab = labels.at(indices[i]);
    if (in.shape() != first.shape() || lab.size() != lab_size) {
      throw ShapeError("training set items have inconsistent shapes");
    }
    std::copy(in.values().begin(), in.values().end(), x.data() + i * in_size);
    std::copy(lab.values().begin(), lab.values().end(), y.data() + i * lab_size);
  }
  return {std::move(x), std::move(y)};
}

TrainingSet TrainingSet::Subset(std::span<const size_t> indices) const {
  TrainingSet out;
  out.inputs.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (size_t i : indices) {
    out.inputs.push_back(inputs.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("patience", "must be >= 1");
}

bool EarlyStopping::Update(double loss) {
  ++epoch_;
  if (best_epoch_ == 0 || loss < best_loss_) {
    best_loss_ = loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

double TrainStep(MiniSegNet& model, Adam& optimizer, const Tensor& batch, const Tensor& labels,
                 const TrainConfig& config, Rng& rng, long batch_id) {
  Tape tape;
  const auto heads = model.Build(tape, tape.Constant(batch), /*bn_training=*/true,
                                 /*dropout_active=*/true, &rng);
  const Tensor& logits = tape.value(heads.logits);
  const Tensor& log_var = tape.value(heads.log_var);
  LossResult loss = AttenuatedBceLoss(logits, log_var, labels, config.attenuation_samples, rng,
                                      config.attenuation);
  if (!std::isfinite(loss.loss)) {
    throw NumericError("non-finite training loss on batch " + std::to_string(batch_id));
  }
  loss.grad_logits.Reshape(logits.shape());
  loss.grad_log_var.Reshape(log_var.shape());
  const std::pair<Var, Tensor> seeds[] = {{heads.logits, std::move(loss.grad_logits)},
                                          {heads.log_var, std::move(loss.grad_log_var)}};
  tape.Backward(seeds);
  optimizer.Step(model.params());
  return loss.loss;
}

double EvaluateLoss(MiniSegNet& model, const TrainingSet& set, const TrainConfig& config,
                    uint64_t noise_seed) {
  Rng rng(noise_seed);
  double total = 0.0;
  size_t pixels = 0;
  std::vector<size_t> idx;
  for (size_t start = 0; start < set.size(); start += static_cast<size_t>(config.batch_size)) {
    idx.clear();
    for (size_t i = start; i < std::min(set.size(), start + config.batch_size); ++i) idx.push_back(i);
    auto [x, y] = set.Batch(idx);
    const ForwardOutput out = model.Forward(x, /*dropout_active=*/false, nullptr);
    const LossResult r = AttenuatedBceLoss(out.logits, out.log_var, y, config.attenuation_samples,
                                           rng, config.attenuation, /*want_grad=*/false);
    total += r.loss * static_cast<double>(y.size());
    pixels += y.size();
  }
  return total / static_cast<double>(pixels);
}

TrainResult Train(const MiniSegNetConfig& model_config, const TrainingSet& train,
                  const TrainingSet& vs1, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.Validate();
  if (train.size() == 0) throw Error("training split is empty");
  if (vs1.size() == 0) throw Error("VS1 split is empty");
  MiniSegNet model(model_config, DeriveSeed(config.seed, "init"));
  Adam optimizer(config.Adam());
  EarlyStopping stopper(config.patience);
  const uint64_t vs1_seed = DeriveSeed(config.seed, "vs1-noise");

  TrainResult result;
  result.weights = model.weights();
  std::vector<size_t> order(train.size());
  const size_t bs = static_cast<size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle(DeriveSeed(config.seed, "shuffle", static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.UniformInt(i)]);

    double epoch_loss = 0.0;
    size_t seen = 0;
    long batch_id = 0;
    for (size_t start = 0; start < order.size(); start += bs, ++batch_id) {
      const size_t end = std::min(order.size(), start + bs);
      auto [x, y] = train.Batch(std::span<const size_t>(order).subspan(start, end - start));
      Rng step_rng(DeriveSeed(config.seed, "step", static_cast<uint64_t>(epoch) * 1000003ULL + batch_id));
      double loss;
      try {
        loss = TrainStep(model, optimizer, x, y, config, step_rng, batch_id);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      epoch_loss += loss * static_cast<double>(end - start);
      seen += end - start;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(seen);
    rec.vs1_loss = EvaluateLoss(model, vs1, config, vs1_seed);
    if (!std::isfinite(rec.vs1_loss)) {
      throw NumericError("non-finite VS1 loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.Update(rec.vs1_loss)) result.weights = model.weights();
    if (stopper.ShouldStop()) break;
  }
  result.stopped_epoch = static_cast<int>(result.history.size());
  result.best_epoch = stopper.best_epoch();
  return result;
}

std::string HistoryCsv(std::span<const EpochRecord> history) {
  std::ostringstream s;
  s.precision(9);
  s << "epoch,train_loss,vs1_loss\n";
  for (const EpochRecord& r : history) s << r.epoch << ',' << r.train_loss << ',' << r.vs1_loss << '\n';
  return s.str();
}

}  // namespace msunet::nn
