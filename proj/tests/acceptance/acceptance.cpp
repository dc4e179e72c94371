// Acceptance suite: one PASS/FAIL line per criterion. Criteria 4-7 train
// the full-size models on the synthetic annulus set and take roughly half an
// hour on one CPU core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core/attention.hpp"
#include "core/evaluate.hpp"
#include "core/generate.hpp"
#include "core/losses.hpp"
#include "core/metrics.hpp"
#include "core/random.hpp"
#include "core/stats.hpp"
#include "core/train.hpp"
#include "test_support.hpp"

using namespace attrivae;
using nn::Matrix;

namespace {

constexpr int kSamples = 2000;
constexpr double kSplit = 0.75;  // 1500 train / 500 test
constexpr int kEpochs = 30;
constexpr int kScanSteps = 7;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

int failures = 0;

void report(int id, const std::string& title, Outcome& o, double seconds, double budget = 0.0) {
  if (budget > 0.0) o.require(seconds < budget, "runtime " + fmt(seconds) + "s < " + fmt(budget) + "s");
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " -- " << o.detail.str()
            << " (" << fmt(seconds) << " s)" << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix<double> from_vector(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix<double>>(v.data(), rows, cols);
}

// ------------------------------------------------------------------ 1

void criterion_loss_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const Matrix<double> zeros = Matrix<double>::Zero(8, 4);
  o.require(kl_loss(zeros, zeros) == 0.0, "kl(0,0)=" + fmt(kl_loss(zeros, zeros)));

  AttributeMapping m;
  m.entries = {{"a", 0}};
  Matrix<double> z(1, 2), up(2, 1), down(2, 1);
  z << 0.0, 10.0;
  up << 0.0, 1.0;
  down << 1.0, 0.0;
  const double mono = attr_reg_loss(z, up, m, 10.0);
  const double anti = attr_reg_loss(z, down, m, 10.0);
  o.require(mono <= 1e-3, "AR monotone=" + fmt(mono));
  o.require(anti == 1.0, "AR anti-monotone=" + fmt(anti));

  const std::vector<double> half(8, 0.5), ones(8, 1.0);
  const double bce_half = recon_loss<double>(half, half, 1, ReconKind::bce);
  const double bce_ones = recon_loss<double>(half, ones, 1, ReconKind::bce);
  Matrix<double> y(1, 2);
  y << 0.9, 0.1;
  const std::vector<int> labels{1, 0};
  const double mlp = mlp_loss(y, std::span<const int>(labels));
  const bool bce_ok = std::abs(bce_half - 8 * std::numbers::ln2) <= 1e-9 &&
                      std::abs(bce_ones - 8 * std::numbers::ln2) <= 1e-9 && std::abs(mlp + std::log(0.9)) <= 1e-9;
  o.require(bce_ok, "BCE analytic cases within 1e-9");
  report(1, "loss oracles", o, seconds_since(t0), 1.0);
}

// ------------------------------------------------------------------ 2

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  Rng rng(17);
  const double h = 1e-6;
  using test_support::max_rel_error;
  using test_support::numeric_gradient;
  using test_support::to_vector;

  {
    std::vector<double> xh(32), x(32), g(32);
    for (std::size_t i = 0; i < 32; ++i) {
      xh[i] = rng.uniform(0.05, 0.95);
      x[i] = rng.uniform();
    }
    double worst = 0;
    for (ReconKind kind : {ReconKind::bce, ReconKind::mse}) {
      recon_loss<double>(xh, x, 4, kind, g);
      worst = std::max(worst, max_rel_error(g, numeric_gradient(
                                                   [&](const std::vector<double>& v) {
                                                     return recon_loss<double>(v, x, 4, kind);
                                                   },
                                                   xh, h)));
    }
    o.require(worst <= 1e-4, "recon " + fmt(worst));
  }
  {
    Matrix<double> mu(6, 4), lv(6, 4), gmu, glv;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      mu.data()[i] = rng.uniform(-1, 1);
      lv.data()[i] = rng.uniform(-1, 1);
    }
    kl_loss(mu, lv, &gmu, &glv);
    const double e1 = max_rel_error(
        to_vector(gmu),
        numeric_gradient([&](const std::vector<double>& v) { return kl_loss(from_vector(v, 6, 4), lv); },
                         to_vector(mu), h));
    const double e2 = max_rel_error(
        to_vector(glv),
        numeric_gradient([&](const std::vector<double>& v) { return kl_loss(mu, from_vector(v, 6, 4)); },
                         to_vector(lv), h));
    o.require(std::max(e1, e2) <= 1e-4, "KL " + fmt(std::max(e1, e2)));
  }
  {
    const int n = 8;
    Matrix<double> z(4, n), a(n, 2), gz;
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform();
    AttributeMapping m;
    m.entries = {{"p", 1}, {"q", 3}};
    attr_reg_loss(z, a, m, 2.0, &gz);
    const double e = max_rel_error(
        to_vector(gz),
        numeric_gradient([&](const std::vector<double>& v) { return attr_reg_loss(from_vector(v, 4, n), a, m, 2.0); },
                         to_vector(z), h));
    o.require(e <= 1e-4, "AR " + fmt(e));
  }
  {
    Matrix<double> y(1, 6), g;
    for (int i = 0; i < 6; ++i) y(0, i) = rng.uniform(0.05, 0.95);
    const std::vector<int> labels{0, 1, 1, 0, 1, 0};
    mlp_loss(y, std::span<const int>(labels), &g);
    const double e = max_rel_error(to_vector(g), numeric_gradient(
                                                     [&](const std::vector<double>& v) {
                                                       return mlp_loss(from_vector(v, 1, 6),
                                                                       std::span<const int>(labels));
                                                     },
                                                     to_vector(y), h));
    o.require(e <= 1e-4, "MLP " + fmt(e));
  }
  {
    // Default architecture: 64x64 input, 4x4 last feature maps.
    Model<float> mf{ModelConfig{}};
    mf.init_weights(23);
    const Model<double> m = mf.cast<double>();
    std::vector<float> x(m.config().image_shape.count());
    for (auto& v : x) v = static_cast<float>(rng.uniform());
    const int dim = 5;
    AttentionDetail<double> detail;
    attention_map(m, x, dim, "", nullptr, &detail);
    auto f = detail.features;
    const double ha = 1e-4;
    std::vector<double> numeric(static_cast<std::size_t>(f.channels), 0.0);
    const auto cells = f.voxels();
    for (int c = 0; c < f.channels; ++c)
      for (std::size_t v = 0; v < cells; ++v) {
        double& cell = f.plane(c, 0)[v];
        const double keep = cell;
        cell = keep + ha;
        const double upv = m.features_to_latent(f, nullptr).mu(dim, 0);
        cell = keep - ha;
        const double downv = m.features_to_latent(f, nullptr).mu(dim, 0);
        cell = keep;
        numeric[static_cast<std::size_t>(c)] += (upv - downv) / (2 * ha) / static_cast<double>(cells);
      }
    const double e = max_rel_error(detail.weights, numeric);
    o.require(f.extent == nn::Extent3{4, 4, 1} && e <= 1e-3, "attention GAP " + fmt(e));
  }
  report(2, "gradient checks", o, seconds_since(t0), 30.0);
}

// ------------------------------------------------------------------ 3

void criterion_metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const int n = 10000, K = 4;
  Rng rng(29);
  Eigen::MatrixXd A(n, K);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) A(i, k) = rng.uniform();
  const Eigen::MatrixXd Z = A;
  AttributeMapping m;
  std::vector<std::string> names;
  for (int k = 0; k < K; ++k) {
    names.push_back("a" + std::to_string(k));
    m.entries.emplace_back(names.back(), k);
  }
  const double mod = metrics::modularity(metrics::mi_matrix(Z, A));
  const double mig = metrics::mig(Z, A);
  const double sap = metrics::sap(Z, A);
  const double scc = metrics::scc(Z, A);
  double interp = 1.0;
  for (const auto& [name, v] : metrics::interpretability(Z, A, names, &m)) interp = std::min(interp, v.value_or(0.0));
  o.require(mod >= 0.95, "modularity " + fmt(mod));
  o.require(mig >= 0.9, "MIG " + fmt(mig));
  o.require(sap >= 0.9, "SAP " + fmt(sap));
  o.require(scc >= 0.99, "SCC " + fmt(scc));
  o.require(interp >= 0.99, "interpretability " + fmt(interp));

  Eigen::MatrixXd X(500, 16);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  const double mmd = metrics::mmd(X, X);
  o.require(std::abs(mmd) <= 1e-12, "mmd(X,X)=" + fmt(mmd));
  std::vector<float> img(64 * 64);
  for (auto& v : img) v = static_cast<float>(rng.uniform());
  const double imi = metrics::image_mi(img, img);
  o.require(std::abs(imi - 1.0) <= 1e-12, "image_mi(x,x)=" + fmt(imi));
  report(3, "metric oracles", o, seconds_since(t0), 60.0);
}

// ------------------------------------------------------------------ 4-7

struct Experiment {
  Dataset dataset;
  DatasetSplit split;
  AttributeMapping mapping;
  std::vector<SweepRow> sweep;
  std::vector<ModelCheckpoint> sweep_checkpoints;
  metrics::MetricsReport attri, beta;
  ModelCheckpoint attri_checkpoint;
  std::vector<TrainLogRow> beta_log;
  double sweep_seconds = 0, beta_seconds = 0;
};

TrainConfig base_config(Variant v) {
  TrainConfig c;
  c.toggles = toggles_for(v);
  c.epochs = kEpochs;
  c.seed = 1;
  c.split_fraction = kSplit;
  c.snapshot_every = 0;
  c.validate_every = kEpochs;
  return c;
}

ModelConfig model_config(Variant v) {
  ModelConfig c;
  c.toggles = toggles_for(v);
  return c;
}

void log_sweep(std::size_t i, const SweepRow& r) {
  std::cout << "  sweep point " << i << ": gamma=" << r.gamma << " interpretability=" << fmt(r.interpretability)
            << " image_mi=" << fmt(r.image_mi) << std::endl;
}

Experiment run_experiment() {
  Experiment e;
  AnnulusSpec spec;
  spec.n_samples = kSamples;
  e.dataset = generate_annulus_dataset(spec);
  const auto& names = annulus_attribute_names();
  for (std::size_t k = 0; k < names.size(); ++k) e.mapping.entries.emplace_back(names[k], static_cast<int>(k));
  e.split = split_for_run(e.dataset, base_config(Variant::attri_vae));
  std::cout << "  dataset: " << e.split.train.size() << " train / " << e.split.test.size() << " test, " << kEpochs
            << " epochs per model" << std::endl;

  // gamma sweep at beta=2, delta=10; its gamma=200 point is the Attri-VAE model.
  auto t0 = std::chrono::steady_clock::now();
  SweepGrid grid;
  e.sweep = hyperparameter_sweep(model_config(Variant::attri_vae), e.dataset, e.mapping,
                                 base_config(Variant::attri_vae), grid, log_sweep, &e.sweep_checkpoints);
  e.sweep_seconds = seconds_since(t0);
  for (std::size_t i = 0; i < e.sweep.size(); ++i)
    if (e.sweep[i].gamma == 200.0) e.attri_checkpoint = e.sweep_checkpoints[i];
  const auto attri = restore(e.attri_checkpoint);
  e.attri = evaluate(attri, e.split.test, e.mapping, {true, metrics::kDefaultBins});

  t0 = std::chrono::steady_clock::now();
  auto beta_cfg = base_config(Variant::beta_vae);
  Model<float> beta(model_config(Variant::beta_vae));
  beta.init_weights(beta_cfg.seed);
  const auto result = train(beta, e.dataset, e.mapping, beta_cfg);
  e.beta_log = result.log;
  e.beta = evaluate(beta, e.split.test, e.mapping, {false, metrics::kDefaultBins});
  e.beta_seconds = seconds_since(t0);
  return e;
}

void criterion_table1(const Experiment& e) {
  Outcome o;
  const double a_interp = metrics::mean_interpretability(e.attri);
  const double b_interp = metrics::mean_interpretability(e.beta);
  o.require(a_interp >= 0.8, "Attri-VAE mean interpretability " + fmt(a_interp));
  double worst_scc = 1.0;
  for (const auto& [name, v] : e.attri.scc_mapped) worst_scc = std::min(worst_scc, v);
  o.require(e.attri.scc_mapped.size() == e.mapping.size() && worst_scc >= 0.9,
            "min mapped |Spearman| " + fmt(worst_scc));
  o.require(b_interp <= 0.5, "beta-VAE mean interpretability " + fmt(b_interp));
  o.require(e.beta.mig <= 0.5 * e.attri.mig, "MIG beta " + fmt(e.beta.mig) + " vs Attri " + fmt(e.attri.mig));
  o.require(e.beta.sap <= 0.5 * e.attri.sap, "SAP beta " + fmt(e.beta.sap) + " vs Attri " + fmt(e.attri.sap));
  const double minutes = (e.sweep_seconds / 4.0 + e.beta_seconds) / 60.0;
  o.require(minutes <= 45.0, "two-model training " + fmt(minutes) + " min");
  report(4, "Attri-VAE vs beta-VAE ordering", o, e.sweep_seconds / 4.0 + e.beta_seconds);
}

void criterion_sweep(const Experiment& e) {
  Outcome o;
  std::vector<SweepRow> low, high;
  for (const auto& r : e.sweep) {
    if (r.gamma == 0.0) low.push_back(r);
    if (r.gamma >= 100.0) high.push_back(r);
  }
  o.require(!low.empty() && !high.empty(), "grid has gamma=0 and gamma>=100 points");
  for (const auto& h : high)
    for (const auto& l : low) {
      o.require(h.interpretability > l.interpretability,
                "gamma=" + fmt(h.gamma) + " interp " + fmt(h.interpretability) + " > " + fmt(l.interpretability));
      o.require(h.image_mi >= 0.85 * l.image_mi,
                "gamma=" + fmt(h.gamma) + " image_mi " + fmt(h.image_mi) + " >= 0.85*" + fmt(l.image_mi));
    }
  report(5, "gamma sweep trend", o, e.sweep_seconds);
}

void criterion_classification(const Experiment& e) {
  Outcome o;
  o.require(e.attri.accuracy >= 0.9, "accuracy " + fmt(e.attri.accuracy));
  o.require(e.attri.auc.has_value() && *e.attri.auc >= 0.9, "AUC " + fmt(e.attri.auc.value_or(0.0)));
  report(6, "classification head", o, 0.0);
}

// Unscarred test sample whose attributes are closest to the medians.
std::size_t typical_sample(const Dataset& test) {
  const auto A = attribute_matrix(test);
  Eigen::VectorXd med(A.cols()), spread(A.cols());
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    std::vector<double> col(A.col(k).data(), A.col(k).data() + A.rows());
    med(k) = stats::median(col);
    spread(k) = std::max(std::sqrt(stats::variance(col)), 1e-12);
  }
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.samples[i].label != 0) continue;
    const double d =
        ((A.row(static_cast<Eigen::Index>(i)).transpose() - med).array() / spread.array()).square().sum();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

void criterion_scan(const Experiment& e) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const auto model = restore(e.attri_checkpoint);
  const auto& test = e.split.test;
  const std::size_t base = typical_sample(test);
  const Eigen::VectorXd z = encode_means(model, test).row(static_cast<Eigen::Index>(base)).transpose();
  struct Scan {
    std::string attribute;
    std::function<double(std::span<const float>)> measure;
  };
  const std::vector<Scan> scans{
      {"cavity_area", [&](std::span<const float> v) { return measure_cavity(v, test.shape); }},
      {"wall_thickness", [&](std::span<const float> v) { return measure_ring_width(v, test.shape); }}};
  for (const auto& s : scans) {
    const int dim = *e.mapping.dim_of(s.attribute);
    const auto range = empirical_dim_range(model, test, dim, 0.98);
    const auto row = scan_attribute(model, z, s.attribute, e.mapping, range, kScanSteps, ScanSpacing::uniform);
    std::vector<double> measured;
    for (const auto& v : row.volumes) measured.push_back(s.measure(v));
    const int inv = count_inversions(measured);
    std::string values;
    for (double v : measured) values += (values.empty() ? "" : " ") + fmt(v);
    o.require(inv <= 1 && measured.back() > measured.front(),
              s.attribute + " [" + values + "] inversions " + std::to_string(inv));
  }
  o.detail << "; base sample " << test.samples[base].id;
  report(7, "attribute scanning control", o, seconds_since(t0));
}

// ------------------------------------------------------------------ 8

void criterion_ablation(const Experiment& e) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  AnnulusSpec spec;
  spec.n_samples = 160;
  spec.seed = 31;
  const auto ds = generate_annulus_dataset(spec);
  std::set<std::vector<double>> objectives;
  double worst = 0.0;
  auto check_log = [&](const std::vector<TrainLogRow>& log, const TrainConfig& cfg) {
    const double beta = effective_beta(cfg.weights, cfg.toggles);
    for (const auto& row : log) {
      for (const auto* b : {&row.train, row.validation ? &*row.validation : nullptr}) {
        if (!b) continue;
        const double expect = b->recon + beta * b->kl + (cfg.toggles.use_mlp ? b->mlp : 0.0) +
                              (cfg.toggles.use_ar ? cfg.weights.gamma * b->ar : 0.0);
        worst = std::max(worst, std::abs(b->total - expect) / std::max(1.0, std::abs(b->total)));
        if (!cfg.toggles.use_mlp && b->mlp != 0.0) worst = 1.0;
        if (!cfg.toggles.use_ar && b->ar != 0.0) worst = 1.0;
      }
    }
  };
  for (Variant v : {Variant::vae, Variant::beta_vae, Variant::ar_vae, Variant::attri_vae}) {
    auto cfg = base_config(v);
    cfg.epochs = 3;
    cfg.validate_every = 1;
    Model<float> m(model_config(v));
    m.init_weights(cfg.seed);
    const auto r = train(m, ds, e.mapping, cfg);
    check_log(r.log, cfg);
    const auto& first = r.log.front().train;
    objectives.insert({effective_beta(cfg.weights, cfg.toggles), first.mlp != 0.0 ? 1.0 : 0.0,
                       first.ar != 0.0 ? 1.0 : 0.0});
  }
  check_log(e.beta_log, base_config(Variant::beta_vae));
  o.require(objectives.size() == 4, std::to_string(objectives.size()) + " distinct objectives");
  o.require(worst <= 1e-6, "max total-identity residual " + fmt(worst));
  report(8, "ablation parity", o, seconds_since(t0));
}

}  // namespace

int main() {
  std::cout << "acceptance suite" << std::endl;
  criterion_loss_oracles();
  criterion_gradients();
  criterion_metric_oracles();
  const Experiment e = run_experiment();
  criterion_table1(e);
  criterion_sweep(e);
  criterion_classification(e);
  criterion_scan(e);
  criterion_ablation(e);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
