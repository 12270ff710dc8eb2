#ifndef MSUNET_ENSEMBLE_COMBINER_H_
#define MSUNET_ENSEMBLE_COMBINER_H_

#include <span>
#include <vector>

#include "msunet/nn/mc.h"
#include "msunet/nn/train.h"

namespace msunet::ensemble {

// Stacks deterministic member probability maps as channels (ascending
// member order), optionally followed by the raw image. image is [H, W];
// the result is [K (+1), H, W].
Tensor BuildCombinerInput(std::span<nn::MiniSegNet> members, const Tensor& image,
                          bool append_image = false);

// Combiner inputs for a whole split; parallel over images.
nn::TrainingSet MakeCombinerSet(std::span<nn::MiniSegNet> members, std::span<const Tensor> images,
                                std::span<const Tensor> labels, bool append_image, int threads = 1);

// Trains a MiniSegNet with in_channels = K (+1) on combiner inputs, with the
// same loss and early-stopping machinery as the candidates.
nn::TrainResult TrainCombiner(std::span<nn::MiniSegNet> members, nn::MiniSegNetConfig model_config,
                              std::span<const Tensor> train_images,
                              std::span<const Tensor> train_labels,
                              std::span<const Tensor> vs1_images, std::span<const Tensor> vs1_labels,
                              const nn::TrainConfig& train_config, bool append_image = false,
                              int threads = 1, const nn::EpochCallback& on_epoch = {});

// Full MSU-Net prediction: member passes, then T MC passes of the combiner.
nn::McOutput PredictEnsemble(std::span<nn::MiniSegNet> members, nn::MiniSegNet& combiner,
                             const Tensor& image, int passes, Rng& rng, bool append_image = false);

}  // namespace msunet::ensemble

#endif  // MSUNET_ENSEMBLE_COMBINER_H_
