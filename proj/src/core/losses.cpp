#include "core/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace attrivae {

void LossWeights::validate() const {
  if (!std::isfinite(beta) || beta < 0) throw std::invalid_argument("loss.beta must be finite and nonnegative");
  if (!std::isfinite(gamma) || gamma < 0) throw std::invalid_argument("loss.gamma must be finite and nonnegative");
  if (!std::isfinite(delta) || delta <= 0) throw std::invalid_argument("loss.delta must be finite and positive");
}

std::optional<int> AttributeMapping::dim_of(const std::string& attribute) const {
  for (const auto& [name, dim] : entries)
    if (name == attribute) return dim;
  return std::nullopt;
}

std::vector<int> AttributeMapping::dims() const {
  std::vector<int> out;
  for (const auto& e : entries) out.push_back(e.second);
  return out;
}

std::vector<std::string> AttributeMapping::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.first);
  return out;
}

void AttributeMapping::validate(int latent_dim) const {
  if (entries.size() > static_cast<std::size_t>(latent_dim))
    throw std::invalid_argument("mapping: " + std::to_string(entries.size()) + " attributes exceed latent_dim " +
                                std::to_string(latent_dim));
  std::set<int> seen_dims;
  std::set<std::string> seen_names;
  for (const auto& [name, dim] : entries) {
    if (dim < 0 || dim >= latent_dim)
      throw std::invalid_argument("mapping: dimension " + std::to_string(dim) + " for attribute '" + name +
                                  "' is outside [0, " + std::to_string(latent_dim) + ")");
    if (!seen_dims.insert(dim).second)
      throw std::invalid_argument("mapping: dimension " + std::to_string(dim) + " assigned twice");
    if (!seen_names.insert(name).second) throw std::invalid_argument("mapping: attribute '" + name + "' listed twice");
  }
}

template <typename T>
double recon_loss(std::span<const T> x_hat, std::span<const T> x, int batch, ReconKind kind, std::span<T> grad) {
  if (x_hat.size() != x.size()) throw std::invalid_argument("recon_loss: shape mismatch");
  if (batch <= 0) throw std::invalid_argument("recon_loss: batch must be positive");
  if (!grad.empty() && grad.size() != x.size()) throw std::invalid_argument("recon_loss: gradient size mismatch");
  const double inv_batch = 1.0 / batch;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double target = x[i];
    const double pred = x_hat[i];
    if (kind == ReconKind::mse) {
      const double d = pred - target;
      total += d * d;
      if (!grad.empty()) grad[i] = static_cast<T>(2.0 * d * inv_batch);
      continue;
    }
    const double p = std::clamp(pred, kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= target * std::log(p) + (1.0 - target) * std::log(1.0 - p);
    if (!grad.empty()) {
      const bool clamped = pred < kProbabilityClamp || pred > 1.0 - kProbabilityClamp;
      grad[i] = clamped ? T(0) : static_cast<T>((p - target) / (p * (1.0 - p)) * inv_batch);
    }
  }
  return total * inv_batch;
}

template <typename T>
double kl_loss(const nn::Matrix<T>& mu, const nn::Matrix<T>& logvar, nn::Matrix<T>* grad_mu,
               nn::Matrix<T>* grad_logvar) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols())
    throw std::invalid_argument("kl_loss: mu and logvar must share a shape");
  const auto n = mu.cols();
  if (n == 0) throw std::invalid_argument("kl_loss: empty batch");
  const double inv_batch = 1.0 / static_cast<double>(n);
  if (grad_mu) grad_mu->resize(mu.rows(), n);
  if (grad_logvar) grad_logvar->resize(mu.rows(), n);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index d = 0; d < mu.rows(); ++d) {
      const double m = mu(d, j);
      const double lv = logvar(d, j);
      const double e = std::exp(lv);
      total += 0.5 * (m * m + e - 1.0 - lv);
      if (grad_mu) (*grad_mu)(d, j) = static_cast<T>(m * inv_batch);
      if (grad_logvar) (*grad_logvar)(d, j) = static_cast<T>(0.5 * (e - 1.0) * inv_batch);
    }
  return total * inv_batch;
}

namespace {

inline double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

template <typename T>
double attr_reg_loss(const nn::Matrix<T>& z, const nn::Matrix<double>& attrs, const AttributeMapping& mapping,
                     double delta, nn::Matrix<T>* grad_z) {
  const auto n = z.cols();
  if (n < 2) throw std::invalid_argument("attr_reg_loss: need at least 2 samples to form pairs, got " +
                                         std::to_string(n));
  if (attrs.rows() != n)
    throw std::invalid_argument("attr_reg_loss: attribute rows (" + std::to_string(attrs.rows()) +
                                ") differ from batch size (" + std::to_string(n) + ")");
  if (attrs.cols() != static_cast<Eigen::Index>(mapping.size()))
    throw std::invalid_argument("attr_reg_loss: attribute columns differ from mapping size");
  mapping.validate(static_cast<int>(z.rows()));
  if (grad_z) grad_z->setZero(z.rows(), n);
  const double inv_pairs = 1.0 / static_cast<double>(n * n);
  double total = 0.0;
  for (std::size_t k = 0; k < mapping.size(); ++k) {
    const auto d = static_cast<Eigen::Index>(mapping.entries[k].second);
    const auto col = static_cast<Eigen::Index>(k);
    double term = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;  // zero diagonal: tanh(0) - sgn(0) = 0
        const double t = std::tanh(delta * (static_cast<double>(z(d, i)) - static_cast<double>(z(d, j))));
        const double s = sgn(attrs(i, col) - attrs(j, col));
        const double r = t - s;
        term += std::abs(r);
        if (grad_z) {
          const double g = sgn(r) * delta * (1.0 - t * t) * inv_pairs;
          (*grad_z)(d, i) += static_cast<T>(g);
          (*grad_z)(d, j) -= static_cast<T>(g);
        }
      }
    total += term * inv_pairs;
  }
  return total;
}

template <typename T>
double mlp_loss(const nn::Matrix<T>& y_pred, std::span<const int> y_true, nn::Matrix<T>* grad) {
  const auto n = y_pred.cols();
  if (y_pred.rows() != 1 || static_cast<std::size_t>(n) != y_true.size())
    throw std::invalid_argument("mlp_loss: expected 1 x N predictions matching the label count");
  if (n == 0) throw std::invalid_argument("mlp_loss: empty batch");
  const double inv_batch = 1.0 / static_cast<double>(n);
  if (grad) grad->resize(1, n);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double pred = y_pred(0, j);
    const double target = y_true[static_cast<std::size_t>(j)];
    const double p = std::clamp(pred, kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= target * std::log(p) + (1.0 - target) * std::log(1.0 - p);
    if (grad) {
      const bool clamped = pred < kProbabilityClamp || pred > 1.0 - kProbabilityClamp;
      (*grad)(0, j) = clamped ? T(0) : static_cast<T>((p - target) / (p * (1.0 - p)) * inv_batch);
    }
  }
  return total * inv_batch;
}

double effective_beta(const LossWeights& weights, const VariantToggles& toggles) {
  return toggles.use_beta ? weights.beta : 1.0;
}

LossBreakdown combine_losses(double recon, double kl, double mlp, double ar, const LossWeights& weights,
                             const VariantToggles& toggles) {
  LossBreakdown b;
  b.recon = recon;
  b.kl = kl;
  b.mlp = toggles.use_mlp ? mlp : 0.0;
  b.ar = toggles.use_ar ? ar : 0.0;
  b.total = b.recon + effective_beta(weights, toggles) * b.kl + b.mlp + weights.gamma * b.ar;
  return b;
}

template <typename T>
LossBreakdown total_loss(const LossInputs<T>& in, const LossWeights& weights, const VariantToggles& toggles,
                         LossGradients<T>* grads) {
  if (!in.x || !in.x_hat || !in.mu || !in.logvar || !in.z)
    throw std::invalid_argument("total_loss: missing model outputs");
  const int batch = in.x->batch;
  const double beta = effective_beta(weights, toggles);

  if (grads) grads->x_hat = nn::FeatureMap<T>(in.x_hat->channels, in.x_hat->batch, in.x_hat->extent);
  const double recon = recon_loss<T>(in.x_hat->data, in.x->data, batch, in.recon_kind,
                                     grads ? std::span<T>(grads->x_hat.data) : std::span<T>{});

  const double kl = kl_loss(*in.mu, *in.logvar, grads ? &grads->mu : nullptr, grads ? &grads->logvar : nullptr);
  if (grads) {
    grads->mu *= static_cast<T>(beta);
    grads->logvar *= static_cast<T>(beta);
    grads->z.setZero(in.z->rows(), in.z->cols());
  }

  double mlp = 0.0;
  if (toggles.use_mlp) {
    if (!in.y_pred) throw std::invalid_argument("total_loss: classifier output required when use_mlp is on");
    mlp = mlp_loss(*in.y_pred, in.labels, grads ? &grads->y_pred : nullptr);
  }

  double ar = 0.0;
  if (toggles.use_ar) {
    if (!in.attrs || !in.mapping) throw std::invalid_argument("total_loss: attributes required when use_ar is on");
    nn::Matrix<T> gz;
    ar = attr_reg_loss(*in.z, *in.attrs, *in.mapping, weights.delta, grads ? &gz : nullptr);
    if (grads) grads->z += static_cast<T>(weights.gamma) * gz;
  }
  return combine_losses(recon, kl, mlp, ar, weights, toggles);
}

#define ATTRIVAE_LOSS_INSTANTIATE(T)                                                                         \
  template double recon_loss<T>(std::span<const T>, std::span<const T>, int, ReconKind, std::span<T>);       \
  template double kl_loss<T>(const nn::Matrix<T>&, const nn::Matrix<T>&, nn::Matrix<T>*, nn::Matrix<T>*);    \
  template double attr_reg_loss<T>(const nn::Matrix<T>&, const nn::Matrix<double>&, const AttributeMapping&, \
                                   double, nn::Matrix<T>*);                                                  \
  template double mlp_loss<T>(const nn::Matrix<T>&, std::span<const int>, nn::Matrix<T>*);                   \
  template LossBreakdown total_loss<T>(const LossInputs<T>&, const LossWeights&, const VariantToggles&,      \
                                       LossGradients<T>*);

ATTRIVAE_LOSS_INSTANTIATE(float)
ATTRIVAE_LOSS_INSTANTIATE(double)

}  // namespace attrivae
