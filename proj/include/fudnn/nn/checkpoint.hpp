#pragma once

#include <filesystem>

#include "fudnn/nn/classifier.hpp"

namespace fudnn::nn {

// <dir>/model.json (spec, classes, seed, epoch, weights, train config, tensor
// table) and <dir>/model.bin (little-endian float32 tensors in state() order).
void save_checkpoint(const std::filesystem::path& dir, Classifier& model, const TrainConfig& config);
Classifier load_checkpoint(const std::filesystem::path& dir);

} // namespace fudnn::nn
