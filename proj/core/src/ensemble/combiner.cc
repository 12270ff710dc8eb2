#include "msunet/ensemble/combiner.h"

#include <algorithm>

#include "msunet/error.h"
#include "msunet/parallel.h"

namespace msunet::ensemble {

Tensor BuildCombinerInput(std::span<nn::MiniSegNet> members, const Tensor& image, bool append_image) {
  if (members.empty()) throw Error("combiner needs at least one member");
  if (image.rank() != 2) throw ShapeError("combiner input image must be [H,W], got " + ShapeString(image.shape()));
  const int k = static_cast<int>(members.size());
  const int channels = k + (append_image ? 1 : 0);
  const int h = image.dim(0), w = image.dim(1);
  const size_t hw = image.size();
  Tensor out({channels, h, w});
  for (int c = 0; c < k; ++c) {
    const Tensor p = nn::PredictProbabilities(members[static_cast<size_t>(c)], image);
    std::copy_n(p.data(), hw, out.data() + c * hw);
  }
  if (append_image) std::copy_n(image.data(), hw, out.data() + k * hw);
  return out;
}

nn::TrainingSet MakeCombinerSet(std::span<nn::MiniSegNet> members, std::span<const Tensor> images,
                                std::span<const Tensor> labels, bool append_image, int threads) {
  if (images.size() != labels.size()) throw Error("image and label counts differ");
  nn::TrainingSet set;
  set.inputs.resize(images.size());
  set.labels.assign(labels.begin(), labels.end());
  ParallelFor(images.size(), threads, [&](size_t i) {
    set.inputs[i] = BuildCombinerInput(members, images[i], append_image);
  });
  return set;
}

nn::TrainResult TrainCombiner(std::span<nn::MiniSegNet> members, nn::MiniSegNetConfig model_config,
                              std::span<const Tensor> train_images,
                              std::span<const Tensor> train_labels,
                              std::span<const Tensor> vs1_images, std::span<const Tensor> vs1_labels,
                              const nn::TrainConfig& train_config, bool append_image, int threads,
                              const nn::EpochCallback& on_epoch) {
  model_config.in_channels = static_cast<int>(members.size()) + (append_image ? 1 : 0);
  const nn::TrainingSet train = MakeCombinerSet(members, train_images, train_labels, append_image, threads);
  const nn::TrainingSet vs1 = MakeCombinerSet(members, vs1_images, vs1_labels, append_image, threads);
  return nn::Train(model_config, train, vs1, train_config, on_epoch);
}

nn::McOutput PredictEnsemble(std::span<nn::MiniSegNet> members, nn::MiniSegNet& combiner,
                             const Tensor& image, int passes, Rng& rng, bool append_image) {
  return nn::McPredict(combiner, BuildCombinerInput(members, image, append_image), passes, rng);
}

}  // namespace msunet::ensemble
