#include "core/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/stats.hpp"

namespace attrivae {

namespace {

nn::FeatureMap<float> batch_of(const Dataset& ds, std::size_t begin, std::size_t end) {
  std::vector<const std::vector<float>*> vols;
  for (std::size_t i = begin; i < end; ++i) vols.push_back(&ds.samples[i].volume);
  return make_batch<float>(vols, ds.shape);
}

template <typename Fn>
void for_each_batch(std::size_t n, std::size_t batch, Fn&& fn) {
  for (std::size_t b = 0; b < n; b += batch) fn(b, std::min(n, b + batch));
}

std::vector<std::string> metric_attributes(const Dataset& ds, const AttributeMapping& mapping) {
  return mapping.size() ? mapping.names() : ds.attribute_names;
}

Eigen::MatrixXd select_columns(const Dataset& ds, const std::vector<std::string>& names) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::size_t c = ds.attribute_index(names[k]);
    for (std::size_t i = 0; i < ds.size(); ++i)
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ds.samples[i].attributes[c];
  }
  return A;
}

}  // namespace

Eigen::MatrixXd encode_means(const Model<float>& model, const Dataset& dataset) {
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(dataset.size()), model.latent_dim());
  for_each_batch(dataset.size(), kEvalBatch, [&](std::size_t b, std::size_t e) {
    const auto lat = model.encode(batch_of(dataset, b, e));
    Z.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)) =
        lat.mu.transpose().template cast<double>();
  });
  return Z;
}

Eigen::MatrixXd attribute_matrix(const Dataset& dataset) { return select_columns(dataset, dataset.attribute_names); }

std::vector<std::vector<float>> reconstruct(const Model<float>& model, const Dataset& dataset) {
  std::vector<std::vector<float>> out;
  out.reserve(dataset.size());
  const std::size_t vox = dataset.shape.count();
  for_each_batch(dataset.size(), kEvalBatch, [&](std::size_t b, std::size_t e) {
    const auto xh = model.decode(model.encode(batch_of(dataset, b, e)).mu);
    for (std::size_t n = 0; n < e - b; ++n) {
      const float* p = xh.plane(0, static_cast<int>(n));
      out.emplace_back(p, p + vox);
    }
  });
  return out;
}

std::vector<double> classify_means(const Model<float>& model, const Dataset& dataset) {
  std::vector<double> out;
  out.reserve(dataset.size());
  for_each_batch(dataset.size(), kEvalBatch, [&](std::size_t b, std::size_t e) {
    const auto y = model.classify(model.encode(batch_of(dataset, b, e)).mu);
    for (Eigen::Index n = 0; n < y.cols(); ++n) out.push_back(y(0, n));
  });
  return out;
}

LossBreakdown evaluation_loss(const Model<float>& model, const Dataset& dataset, const AttributeMapping& mapping,
                              const LossWeights& weights, const VariantToggles& toggles, int batch_size) {
  if (dataset.empty()) throw ConfigError("evaluation_loss: empty dataset");
  const std::size_t bs = static_cast<std::size_t>(std::max(2, batch_size));
  const auto names = mapping.names();
  LossBreakdown sum;
  std::size_t seen = 0;
  std::size_t b = 0;
  while (b < dataset.size()) {
    std::size_t e = std::min(dataset.size(), b + bs);
    if (dataset.size() - e == 1) ++e;  // never leave a single-sample batch
    const auto x = batch_of(dataset, b, e);
    const auto lat = model.encode(x);
    const auto xh = model.decode(lat.mu);
    nn::Matrix<float> y;
    if (toggles.use_mlp) y = model.classify(lat.mu);
    std::vector<int> labels;
    for (std::size_t i = b; i < e; ++i) labels.push_back(dataset.samples[i].label);
    nn::Matrix<double> attrs(static_cast<Eigen::Index>(e - b), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) {
      const std::size_t c = dataset.attribute_index(names[k]);
      for (std::size_t i = b; i < e; ++i)
        attrs(static_cast<Eigen::Index>(i - b), static_cast<Eigen::Index>(k)) = dataset.samples[i].attributes[c];
    }
    LossInputs<float> in;
    in.x = &x;
    in.x_hat = &xh;
    in.mu = &lat.mu;
    in.logvar = &lat.logvar;
    in.z = &lat.mu;
    in.y_pred = toggles.use_mlp ? &y : nullptr;
    in.labels = labels;
    in.attrs = &attrs;
    in.mapping = &mapping;
    in.recon_kind = model.config().recon_loss_kind;
    const bool ar = toggles.use_ar && e - b >= 2;
    VariantToggles t = toggles;
    t.use_ar = ar;
    const auto lb = total_loss(in, weights, t);
    const double w = static_cast<double>(e - b);
    sum.recon += w * lb.recon;
    sum.kl += w * lb.kl;
    sum.mlp += w * lb.mlp;
    sum.ar += w * lb.ar;
    sum.total += w * lb.total;
    seen += e - b;
    b = e;
  }
  const double n = static_cast<double>(seen);
  sum.recon /= n;
  sum.kl /= n;
  sum.mlp /= n;
  sum.ar /= n;
  sum.total /= n;
  return sum;
}

metrics::MetricsReport evaluate(const Model<float>& model, const Dataset& dataset, const AttributeMapping& mapping,
                                const EvaluationOptions& options) {
  if (dataset.size() < 3) throw ConfigError("evaluation needs at least 3 samples");
  const auto names = metric_attributes(dataset, mapping);
  const Eigen::MatrixXd Z = encode_means(model, dataset);
  const Eigen::MatrixXd A = select_columns(dataset, names);
  if (!Z.allFinite()) throw NumericalError("non-finite latent means during evaluation");

  metrics::MetricsReport r;
  const Eigen::MatrixXd mi = metrics::mi_matrix(Z, A, options.bins);
  r.modularity = names.size() >= 2 ? metrics::modularity(mi) : 1.0;
  r.mig = metrics::mig(Z, A, options.bins);
  r.sap = metrics::sap(Z, A);
  r.scc = metrics::scc(Z, A);
  const AttributeMapping* m = options.use_mapping && mapping.size() ? &mapping : nullptr;
  r.interpretability = metrics::interpretability(Z, A, names, m, options.bins);
  if (options.use_mapping && mapping.size()) r.scc_mapped = metrics::scc_mapped(Z, A, names, mapping);

  const auto recon = reconstruct(model, dataset);
  std::vector<double> mis;
  const std::size_t vox = dataset.shape.count();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(dataset.size()), static_cast<Eigen::Index>(vox));
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(dataset.size()), static_cast<Eigen::Index>(vox));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    mis.push_back(metrics::image_mi(dataset.samples[i].volume, recon[i]));
    for (std::size_t v = 0; v < vox; ++v) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) = dataset.samples[i].volume[v];
      Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) = recon[i][v];
    }
  }
  r.image_mi = stats::median(mis);
  r.mmd = metrics::mmd(X, Y);

  const auto probs = classify_means(model, dataset);
  std::vector<int> labels;
  for (const auto& s : dataset.samples) labels.push_back(s.label);
  const auto cls = metrics::classification_scores(probs, labels);
  r.accuracy = cls.accuracy;
  r.auc = cls.auc;
  return r;
}

double interpretability_snapshot(const Model<float>& model, const Dataset& dataset, const AttributeMapping& mapping,
                                 bool use_mapping) {
  const auto names = metric_attributes(dataset, mapping);
  const Eigen::MatrixXd Z = encode_means(model, dataset);
  if (!Z.allFinite()) throw NumericalError("non-finite latent means during evaluation");
  const Eigen::MatrixXd A = select_columns(dataset, names);
  const auto interp = metrics::interpretability(Z, A, names, use_mapping && mapping.size() ? &mapping : nullptr);
  metrics::MetricsReport r;
  r.interpretability = interp;
  return metrics::mean_interpretability(r);
}

}  // namespace attrivae
