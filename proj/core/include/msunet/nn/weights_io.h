#ifndef MSUNET_NN_WEIGHTS_IO_H_
#define MSUNET_NN_WEIGHTS_IO_H_

#include <filesystem>

#include "msunet/nn/segnet.h"

namespace msunet::nn {

// Writes <dir>/weights.json ({fingerprint, config, params:[{name, shape,
// offset, trainable}]}, offsets in bytes) and <dir>/weights.bin (raw
// little-endian float32).
void SaveModel(const std::filesystem::path& dir, const MiniSegNet& model);
MiniSegNet LoadModel(const std::filesystem::path& dir);

}  // namespace msunet::nn

#endif  // MSUNET_NN_WEIGHTS_IO_H_
