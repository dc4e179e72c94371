#pragma once

// Representation-quality metrics. Latent and attribute matrices hold one
// sample per row: Z is n x D (posterior means), A is n x K.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core/losses.hpp"

namespace attrivae::metrics {

using Eigen::MatrixXd;

inline constexpr int kDefaultBins = 20;
inline constexpr int kDefaultImageBins = 32;

// D x K histogram mutual information (nats), equal-width bins per column.
MatrixXd mi_matrix(const MatrixXd& Z, const MatrixXd& A, int bins = kDefaultBins);
// Binned entropy of every column of A.
std::vector<double> binned_entropies(const MatrixXd& A, int bins = kDefaultBins);

double modularity(const MatrixXd& mi);
double mig(const MatrixXd& Z, const MatrixXd& A, int bins = kDefaultBins);
double sap(const MatrixXd& Z, const MatrixXd& A);
double scc(const MatrixXd& Z, const MatrixXd& A);
// |Spearman| at each mapped dimension, per attribute.
std::map<std::string, double> scc_mapped(const MatrixXd& Z, const MatrixXd& A,
                                         const std::vector<std::string>& attribute_names,
                                         const AttributeMapping& mapping);

// Clipped R^2 of a one-dimensional linear fit of each attribute on its
// mapped latent dimension, or on the max-MI dimension when the attribute has
// no mapping. Zero-variance attributes map to nullopt.
std::map<std::string, std::optional<double>> interpretability(const MatrixXd& Z, const MatrixXd& A,
                                                               const std::vector<std::string>& attribute_names,
                                                               const AttributeMapping* mapping,
                                                               int bins = kDefaultBins);
// Dimension used by `interpretability` for every attribute.
std::vector<int> interpretability_dims(const MatrixXd& Z, const MatrixXd& A,
                                       const std::vector<std::string>& attribute_names,
                                       const AttributeMapping* mapping, int bins = kDefaultBins);

// Squared MMD (biased V-statistic), Gaussian kernel with median-heuristic
// bandwidth over X u Y. Rows are flattened samples.
double mmd(const MatrixXd& X, const MatrixXd& Y);
double median_heuristic_bandwidth(const MatrixXd& X, const MatrixXd& Y);

// Normalized joint-histogram MI I/sqrt(H(x) H(y)) of two equally-shaped
// intensity images in [0,1]; 0 when either image is constant.
double image_mi(std::span<const float> x, std::span<const float> y, int bins = kDefaultImageBins);

struct ClassificationScores {
  double accuracy = 0.0;
  std::optional<double> auc;
};

// Accuracy at threshold 0.5; AUC as the Mann-Whitney rank statistic (ties
// count one half), absent when only one class is present.
ClassificationScores classification_scores(std::span<const double> y_pred, std::span<const int> y_true);

// Best single-threshold balanced accuracy of a scalar score for binary labels.
double best_threshold_balanced_accuracy(std::span<const double> score, std::span<const int> labels);

struct MetricsReport {
  double modularity = 0.0;
  double mig = 0.0;
  double sap = 0.0;
  double scc = 0.0;
  std::map<std::string, std::optional<double>> interpretability;
  std::map<std::string, double> scc_mapped;
  double mmd = 0.0;
  double image_mi = 0.0;
  double accuracy = 0.0;
  std::optional<double> auc;
};

std::string to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);
// Mean over non-null interpretability entries.
double mean_interpretability(const MetricsReport& report);

}  // namespace attrivae::metrics
