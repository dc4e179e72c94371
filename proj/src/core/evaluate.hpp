#pragma once

// Batched evaluation-mode passes over a dataset and the full metric report.

#include <vector>

#include "core/dataio.hpp"
#include "core/losses.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"

namespace attrivae {

inline constexpr int kEvalBatch = 32;

// n x D matrix of posterior means.
Eigen::MatrixXd encode_means(const Model<float>& model, const Dataset& dataset);
// n x K attribute matrix in dataset column order.
Eigen::MatrixXd attribute_matrix(const Dataset& dataset);
// Reconstructions decode(mu) of every sample.
std::vector<std::vector<float>> reconstruct(const Model<float>& model, const Dataset& dataset);
// Classifier probabilities at z = mu.
std::vector<double> classify_means(const Model<float>& model, const Dataset& dataset);

// Loss breakdown in evaluation mode with z = mu (deterministic), averaged
// over consecutive batches of `batch_size`.
LossBreakdown evaluation_loss(const Model<float>& model, const Dataset& dataset, const AttributeMapping& mapping,
                              const LossWeights& weights, const VariantToggles& toggles, int batch_size);

struct EvaluationOptions {
  // Use the mapping to pick interpretability dimensions; when false the
  // max-MI dimension is used for every attribute.
  bool use_mapping = true;
  int bins = metrics::kDefaultBins;
};

// Disentanglement metrics over the attributes of the mapping (or all
// dataset attributes without one), median image MI and MMD of
// reconstructions, and classifier scores.
metrics::MetricsReport evaluate(const Model<float>& model, const Dataset& dataset, const AttributeMapping& mapping,
                                const EvaluationOptions& options);

// Mean interpretability on `dataset` only (cheap training-time snapshot).
double interpretability_snapshot(const Model<float>& model, const Dataset& dataset, const AttributeMapping& mapping,
                                 bool use_mapping);

}  // namespace attrivae
