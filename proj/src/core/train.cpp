#include "core/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "core/errors.hpp"
#include "core/evaluate.hpp"
#include "core/random.hpp"
#include "core/stats.hpp"

namespace attrivae {

namespace {

// Independent RNG streams of one training run.
enum Stream : std::uint64_t { kSplit = 1, kOversample = 2, kShuffle = 3, kNoise = 4 };

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n, std::size_t bs) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < n; b += bs) out.emplace_back(b, std::min(n, b + bs));
  // A trailing single sample joins the previous batch (batch statistics and
  // pairwise terms need at least two samples).
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

void check_mapping(const Dataset& dataset, const AttributeMapping& mapping, int latent_dim) {
  try {
    mapping.validate(latent_dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const auto& [name, dim] : mapping.entries) {
    bool found = std::find(dataset.attribute_names.begin(), dataset.attribute_names.end(), name) !=
                 dataset.attribute_names.end();
    if (!found) throw ConfigError("mapping attribute '" + name + "' is not a dataset attribute");
  }
}

LossBreakdown& accumulate(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.recon += w * b.recon;
  acc.kl += w * b.kl;
  acc.mlp += w * b.mlp;
  acc.ar += w * b.ar;
  acc.total += w * b.total;
  return acc;
}

LossBreakdown scaled(LossBreakdown b, double s) {
  b.recon *= s;
  b.kl *= s;
  b.mlp *= s;
  b.ar *= s;
  b.total *= s;
  return b;
}

}  // namespace

void TrainConfig::validate() const {
  try {
    weights.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (toggles.use_ar && batch_size < 2)
    throw ConfigError("train.batch_size must be at least 2 when the attribute regularization is on");
  if (epochs < 1) throw ConfigError("train.epochs must be positive");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("train.split_fraction must lie in (0, 1)");
  if (patience < 1) throw ConfigError("train.patience must be positive");
  if (snapshot_every < 0) throw ConfigError("train.snapshot_every must be nonnegative");
  if (validate_every < 1) throw ConfigError("train.validate_every must be positive");
}

DatasetSplit split_dataset(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int l = dataset.samples[i].label;
    if (l != 0 && l != 1) throw ConfigError("split: labels must be 0 or 1");
    members[static_cast<std::size_t>(l)].push_back(i);
  }
  for (int c = 0; c < 2; ++c)
    if (members[static_cast<std::size_t>(c)].size() < 2)
      throw ConfigError("split: class " + std::to_string(c) + " has fewer than 2 samples");

  const std::size_t n = dataset.size();
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::array<std::size_t, 2> take{};
  std::array<double, 2> rem{};
  for (std::size_t c = 0; c < 2; ++c) {
    const double ideal = fraction * static_cast<double>(members[c].size());
    take[c] = static_cast<std::size_t>(std::floor(ideal));
    rem[c] = ideal - std::floor(ideal);
  }
  std::size_t assigned = take[0] + take[1];
  const std::size_t first = rem[1] > rem[0] ? 1 : 0;
  for (std::size_t k = 0; assigned < target && k < 2; ++k, ++assigned) ++take[(first + k) % 2];
  for (std::size_t c = 0; c < 2; ++c) take[c] = std::clamp<std::size_t>(take[c], 1, members[c].size() - 1);

  Rng rng(seed);
  std::vector<bool> in_train(n, false);
  for (std::size_t c = 0; c < 2; ++c) {
    auto m = members[c];
    rng.shuffle(m.begin(), m.end());
    for (std::size_t i = 0; i < take[c]; ++i) in_train[m[i]] = true;
  }
  DatasetSplit out;
  out.train.attribute_names = out.test.attribute_names = dataset.attribute_names;
  out.train.shape = out.test.shape = dataset.shape;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.train : out.test).samples.push_back(dataset.samples[i]);
  return out;
}

DatasetSplit split_for_run(const Dataset& dataset, const TrainConfig& config) {
  return split_dataset(dataset, config.split_fraction, derive_seed(config.seed, kSplit));
}

LossBreakdown train_step(Model<float>& model, nn::Adam& optimizer, const nn::FeatureMap<float>& x,
                         std::span<const int> labels, const nn::Matrix<double>& attrs, const AttributeMapping& mapping,
                         const nn::Matrix<float>& noise, const LossWeights& weights, const VariantToggles& toggles) {
  typename Model<float>::EncoderTape et;
  typename Model<float>::DecoderTape dt;
  typename Model<float>::ClassifierTape ct;
  model.zero_grad();
  const auto lat = model.encode(x, nn::Mode::train, et);
  const auto z = reparameterize(lat.mu, lat.logvar, noise);
  const auto xh = model.decode(z, nn::Mode::train, dt);
  nn::Matrix<float> y;
  if (toggles.use_mlp) y = model.classify(z, ct);

  LossInputs<float> in;
  in.x = &x;
  in.x_hat = &xh;
  in.mu = &lat.mu;
  in.logvar = &lat.logvar;
  in.z = &z;
  in.y_pred = toggles.use_mlp ? &y : nullptr;
  in.labels = labels;
  in.attrs = &attrs;
  in.mapping = &mapping;
  in.recon_kind = model.config().recon_loss_kind;
  LossGradients<float> g;
  const auto breakdown = total_loss(in, weights, toggles, &g);
  if (!std::isfinite(breakdown.total)) throw NumericalError("non-finite loss");

  nn::Matrix<float> dz = model.decode_backward(dt, g.x_hat);
  if (g.z.size()) dz += g.z;
  if (toggles.use_mlp) dz += model.classify_backward(ct, g.y_pred);
  const nn::Matrix<float> dmu = dz + g.mu;
  const nn::Matrix<float> dlogvar =
      g.logvar + (dz.array() * noise.array() * (lat.logvar.array() * 0.5f).exp() * 0.5f).matrix();
  model.encode_backward(et, dmu, dlogvar);
  optimizer.step(model.parameters());
  return breakdown;
}

TrainResult train(Model<float>& model, const Dataset& dataset, const AttributeMapping& mapping,
                  const TrainConfig& config, const TrainProgress& progress) {
  config.validate();
  if (!(model.config().toggles == config.toggles))
    throw ConfigError("model toggles differ from the training toggles");
  if (!(model.config().image_shape == dataset.shape))
    throw ConfigError("dataset shape " + nn::to_string(dataset.shape) + " differs from model image_shape " +
                      nn::to_string(model.config().image_shape));
  check_mapping(dataset, mapping, model.latent_dim());
  if (config.toggles.use_ar && mapping.size() == 0)
    throw ConfigError("attribute regularization is on but the mapping is empty");

  const std::string hash = dataset_content_hash(dataset);
  DatasetSplit split = split_for_run(dataset, config);
  Dataset train_set = config.oversample ? oversample_minority(split.train, derive_seed(config.seed, kOversample))
                                        : split.train;
  const Dataset& val_set = split.test;

  // Attribute columns in mapping order.
  std::vector<std::size_t> attr_cols;
  for (const auto& name : mapping.names()) attr_cols.push_back(dataset.attribute_index(name));

  TrainResult result;
  for (const auto& s : val_set.samples) result.test_ids.push_back(s.id);

  nn::Adam::Settings adam_settings;
  adam_settings.lr = config.lr;
  nn::Adam optimizer(adam_settings);
  Rng shuffle_rng(derive_seed(config.seed, kShuffle));
  Rng noise_rng(derive_seed(config.seed, kNoise));
  const int D = model.latent_dim();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batches = make_batches(order.size(), static_cast<std::size_t>(config.batch_size));

  double best_val = INFINITY;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    LossBreakdown acc;
    std::size_t seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto [b, e] = batches[bi];
      const std::size_t n = e - b;
      std::vector<const std::vector<float>*> vols;
      std::vector<int> labels;
      nn::Matrix<double> attrs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(attr_cols.size()));
      for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = train_set.samples[order[b + i]];
        vols.push_back(&s.volume);
        labels.push_back(s.label);
        for (std::size_t k = 0; k < attr_cols.size(); ++k)
          attrs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = s.attributes[attr_cols[k]];
      }
      const auto x = make_batch<float>(vols, train_set.shape);
      nn::Matrix<float> noise(D, static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = static_cast<float>(noise_rng.normal());
      LossBreakdown lb;
      try {
        lb = train_step(model, optimizer, x, labels, attrs, mapping, noise, config.weights, config.toggles);
      } catch (const NumericalError&) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(bi + 1));
      }
      accumulate(acc, lb, static_cast<double>(n));
      seen += n;
    }
    TrainLogRow row;
    row.epoch = epoch;
    row.train = scaled(acc, 1.0 / static_cast<double>(seen));

    const bool last = epoch == config.epochs;
    if (last || epoch % config.validate_every == 0) {
      row.validation =
          evaluation_loss(model, val_set, mapping, config.weights, config.toggles, config.batch_size);
      if (!std::isfinite(row.validation->total))
        throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    if (config.snapshot_every > 0 && (last || epoch % config.snapshot_every == 0) && mapping.size())
      row.interpretability = interpretability_snapshot(model, val_set, mapping, config.toggles.use_ar);

    bool stop = false;
    if (row.validation) {
      if (row.validation->total < best_val) {
        best_val = row.validation->total;
        result.best_epoch = epoch;
        result.best_checkpoint = capture(model, mapping, config.weights, adam_settings, config.seed, epoch, hash);
        since_best = 0;
      } else {
        since_best += config.validate_every;
      }
      stop = config.early_stop && since_best >= config.patience;
    }
    result.log.push_back(row);
    if (progress) progress(row);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.final_checkpoint =
      capture(model, mapping, config.weights, adam_settings, config.seed, result.log.back().epoch, hash);
  return result;
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& csv) {
  std::ofstream f(csv, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + csv.string());
  f << "epoch,recon,kl,mlp,ar,total,val_total,val_interpretability\n";
  for (const auto& r : log) {
    f << r.epoch << ',' << fmt(r.train.recon) << ',' << fmt(r.train.kl) << ',' << fmt(r.train.mlp) << ','
      << fmt(r.train.ar) << ',' << fmt(r.train.total) << ',';
    if (r.validation) f << fmt(r.validation->total);
    f << ',';
    if (r.interpretability) f << fmt(*r.interpretability);
    f << '\n';
  }
}

std::vector<SweepRow> hyperparameter_sweep(const ModelConfig& model_config, const Dataset& dataset,
                                           const AttributeMapping& mapping, const TrainConfig& base,
                                           const SweepGrid& grid, const SweepProgress& progress,
                                           std::vector<ModelCheckpoint>* checkpoints) {
  if (grid.size() == 0) throw ConfigError("sweep grid is empty");
  base.validate();
  std::vector<SweepRow> rows;
  for (double beta : grid.beta)
    for (double gamma : grid.gamma)
      for (double delta : grid.delta) {
        TrainConfig cfg = base;
        cfg.weights = LossWeights{beta, gamma, delta};
        ModelConfig mc = model_config;
        mc.toggles = cfg.toggles;
        Model<float> model(mc);
        model.init_weights(cfg.seed);
        const auto result = train(model, dataset, mapping, cfg);
        const auto test = split_for_run(dataset, cfg).test;

        SweepRow row{beta, gamma, delta, 0.0, 0.0};
        row.interpretability = interpretability_snapshot(model, test, mapping, cfg.toggles.use_ar);
        const auto recon = reconstruct(model, test);
        std::vector<double> mis;
        for (std::size_t i = 0; i < test.size(); ++i) mis.push_back(metrics::image_mi(test.samples[i].volume, recon[i]));
        row.image_mi = stats::median(mis);
        rows.push_back(row);
        if (checkpoints) checkpoints->push_back(result.final_checkpoint);
        if (progress) progress(rows.size() - 1, row);
      }
  return rows;
}

void write_sweep_table(const std::vector<SweepRow>& rows, const std::filesystem::path& csv) {
  std::ofstream f(csv, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + csv.string());
  f << "beta,gamma,delta,interpretability,image_mi\n";
  for (const auto& r : rows)
    f << fmt(r.beta) << ',' << fmt(r.gamma) << ',' << fmt(r.delta) << ',' << fmt(r.interpretability) << ','
      << fmt(r.image_mi) << '\n';
}

}  // namespace attrivae
