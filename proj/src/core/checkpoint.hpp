#pragma once

// A checkpoint is a directory holding `weights.bin` (flat float32 tensors in
// model order) and `manifest.json` (config, mapping, seed, epoch, dataset
// hash, optimizer settings). The manifest is the portable part.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/losses.hpp"
#include "core/model.hpp"
#include "core/nn.hpp"

namespace attrivae {

struct ModelCheckpoint {
  ModelConfig model;
  AttributeMapping mapping;
  LossWeights weights;
  nn::Adam::Settings adam;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string dataset_hash;
  std::vector<std::vector<float>> tensors;  // parameters, then batch-norm buffers
};

ModelCheckpoint capture(Model<float>& model, const AttributeMapping& mapping, const LossWeights& weights,
                        const nn::Adam::Settings& adam, std::uint64_t seed, int epoch, const std::string& dataset_hash);
// Builds a model with the checkpoint's config and weights.
Model<float> restore(const ModelCheckpoint& checkpoint);

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& dir);
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace attrivae
