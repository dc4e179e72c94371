#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/dataio.hpp"
#include "core/losses.hpp"
#include "core/model.hpp"

namespace attrivae {

struct TrainConfig {
  LossWeights weights;
  double lr = 1e-4;
  int batch_size = 16;
  int epochs = 300;
  std::uint64_t seed = 0;
  double split_fraction = 0.7;
  bool oversample = true;
  VariantToggles toggles{};
  bool early_stop = false;
  int patience = 50;
  // Validation interpretability every N epochs (and at the last epoch); 0 disables.
  int snapshot_every = 25;
  // Validation loss every N epochs (and at the last epoch).
  int validate_every = 1;

  // Throws ConfigError; rejects use_ar with batch_size < 2.
  void validate() const;
};

struct TrainLogRow {
  int epoch = 0;
  LossBreakdown train;
  std::optional<LossBreakdown> validation;
  std::optional<double> interpretability;
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

// Stratified by label: each class contributes round-to-largest-remainder
// shares so that the train size is round(fraction * n). Deterministic.
DatasetSplit split_dataset(const Dataset& dataset, double fraction, std::uint64_t seed);
// The split `train` uses for a given configuration.
DatasetSplit split_for_run(const Dataset& dataset, const TrainConfig& config);

struct TrainResult {
  ModelCheckpoint final_checkpoint;
  ModelCheckpoint best_checkpoint;  // lowest validation total
  int best_epoch = 0;
  bool stopped_early = false;
  std::vector<TrainLogRow> log;
  std::vector<std::string> test_ids;
};

using TrainProgress = std::function<void(const TrainLogRow&)>;

// Splits `dataset`, oversamples the training part when configured, and runs
// Adam on the total loss over shuffled mini-batches. `model` must already be
// initialized; it holds the final weights on return. Non-finite losses throw
// NumericalError naming the epoch and batch.
TrainResult train(Model<float>& model, const Dataset& dataset, const AttributeMapping& mapping,
                  const TrainConfig& config, const TrainProgress& progress = {});

// One optimization step on a batch; returns its loss breakdown. Exposed for
// tests. `noise` is D x N standard normal.
LossBreakdown train_step(Model<float>& model, nn::Adam& optimizer, const nn::FeatureMap<float>& x,
                         std::span<const int> labels, const nn::Matrix<double>& attrs, const AttributeMapping& mapping,
                         const nn::Matrix<float>& noise, const LossWeights& weights, const VariantToggles& toggles);

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& csv);

struct SweepGrid {
  std::vector<double> beta{2.0};
  std::vector<double> gamma{0.0, 10.0, 100.0, 200.0};
  std::vector<double> delta{10.0};
  std::size_t size() const { return beta.size() * gamma.size() * delta.size(); }
};

struct SweepRow {
  double beta = 0, gamma = 0, delta = 0;
  double interpretability = 0;
  double image_mi = 0;
};

using SweepProgress = std::function<void(std::size_t index, const SweepRow&)>;

// One model per grid point, all from the same seed and data; evaluated on
// the test split. Rows follow beta-major, then gamma, then delta order.
// Final checkpoints are appended to `checkpoints` when given.
std::vector<SweepRow> hyperparameter_sweep(const ModelConfig& model_config, const Dataset& dataset,
                                           const AttributeMapping& mapping, const TrainConfig& base,
                                           const SweepGrid& grid, const SweepProgress& progress = {},
                                           std::vector<ModelCheckpoint>* checkpoints = nullptr);

void write_sweep_table(const std::vector<SweepRow>& rows, const std::filesystem::path& csv);

}  // namespace attrivae
