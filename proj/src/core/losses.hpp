#pragma once

// Training objective: reconstruction + beta * KL + classifier BCE +
// gamma * attribute regularization, each with an analytic gradient.
//
// Batch conventions: reconstruction, KL and classifier terms are per-sample
// sums averaged over the batch; the attribute term is a mean over all n^2
// sample pairs, summed over regularized attributes.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core/model.hpp"
#include "core/nn.hpp"

namespace attrivae {

struct LossWeights {
  double beta = 2.0;
  double gamma = 200.0;
  double delta = 10.0;

  void validate() const;
};

// Attribute name -> regularized latent dimension, in attribute order.
struct AttributeMapping {
  std::vector<std::pair<std::string, int>> entries;

  std::size_t size() const { return entries.size(); }
  std::optional<int> dim_of(const std::string& attribute) const;
  std::vector<int> dims() const;
  std::vector<std::string> names() const;
  // Unique dimensions, each < latent_dim, at most latent_dim entries.
  void validate(int latent_dim) const;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double mlp = 0.0;
  double ar = 0.0;
  double total = 0.0;
};

inline constexpr double kProbabilityClamp = 1e-7;

// x_hat and x hold `batch` contiguous samples. grad (optional, same size)
// receives d loss / d x_hat.
template <typename T>
double recon_loss(std::span<const T> x_hat, std::span<const T> x, int batch, ReconKind kind,
                  std::span<T> grad = {});

// mu, logvar are D x N.
template <typename T>
double kl_loss(const nn::Matrix<T>& mu, const nn::Matrix<T>& logvar, nn::Matrix<T>* grad_mu = nullptr,
               nn::Matrix<T>* grad_logvar = nullptr);

// z is D x n; attrs is n x K with column k belonging to mapping entry k.
template <typename T>
double attr_reg_loss(const nn::Matrix<T>& z, const nn::Matrix<double>& attrs, const AttributeMapping& mapping,
                     double delta, nn::Matrix<T>* grad_z = nullptr);

// y_pred is 1 x N of probabilities, y_true holds 0/1 labels.
template <typename T>
double mlp_loss(const nn::Matrix<T>& y_pred, std::span<const int> y_true, nn::Matrix<T>* grad = nullptr);

// Weighted sum for the active toggles. Disabled terms are recorded as 0 and
// use_beta=false forces beta to 1.
LossBreakdown combine_losses(double recon, double kl, double mlp, double ar, const LossWeights& weights,
                             const VariantToggles& toggles);
double effective_beta(const LossWeights& weights, const VariantToggles& toggles);

template <typename T>
struct LossInputs {
  const nn::FeatureMap<T>* x = nullptr;
  const nn::FeatureMap<T>* x_hat = nullptr;
  const nn::Matrix<T>* mu = nullptr;
  const nn::Matrix<T>* logvar = nullptr;
  const nn::Matrix<T>* z = nullptr;
  const nn::Matrix<T>* y_pred = nullptr;  // may be null when use_mlp is off
  std::span<const int> labels;
  const nn::Matrix<double>* attrs = nullptr;  // may be null when use_ar is off
  const AttributeMapping* mapping = nullptr;
  ReconKind recon_kind = ReconKind::bce;
};

template <typename T>
struct LossGradients {
  nn::FeatureMap<T> x_hat;
  nn::Matrix<T> mu, logvar;  // direct KL contributions
  nn::Matrix<T> z;           // classifier + attribute contributions
  nn::Matrix<T> y_pred;
};

template <typename T>
LossBreakdown total_loss(const LossInputs<T>& in, const LossWeights& weights, const VariantToggles& toggles,
                         LossGradients<T>* grads = nullptr);

}  // namespace attrivae
