#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "core/checkpoint.hpp"
#include "core/errors.hpp"
#include "core/evaluate.hpp"
#include "core/train.hpp"
#include "test_support.hpp"

using namespace attrivae;

namespace {

Dataset tiny_dataset(int n, std::uint64_t seed = 7) {
  AnnulusSpec spec;
  spec.n_samples = n;
  spec.image_size = 16;
  spec.outer_radius = {4.5, 7.0};
  spec.wall_thickness = {1.0, 3.0};
  spec.seed = seed;
  return generate_annulus_dataset(spec);
}

AttributeMapping annulus_mapping() {
  AttributeMapping m;
  const auto& names = annulus_attribute_names();
  for (std::size_t k = 0; k < names.size(); ++k) m.entries.emplace_back(names[k], static_cast<int>(k));
  return m;
}

TrainConfig quick_config(Variant v, int epochs) {
  TrainConfig c;
  c.toggles = toggles_for(v);
  c.epochs = epochs;
  c.lr = 1e-3;
  c.seed = 3;
  c.snapshot_every = 0;
  return c;
}

Model<float> fresh_model(const TrainConfig& c, std::uint64_t seed = 1) {
  auto mc = test_support::tiny_config();
  mc.toggles = c.toggles;
  Model<float> m(mc);
  m.init_weights(seed);
  return m;
}

double moving_average(const std::vector<TrainLogRow>& log, std::size_t from, std::size_t count) {
  double s = 0;
  for (std::size_t i = from; i < from + count; ++i) s += log[i].train.recon + log[i].train.kl;
  return s / static_cast<double>(count);
}

}  // namespace

TEST_CASE("stratified split") {
  const auto ds = tiny_dataset(100);
  const auto a = split_dataset(ds, 0.7, 11);
  CHECK(a.train.size() == 70);
  CHECK(a.test.size() == 30);
  const auto b = split_dataset(ds, 0.7, 11);
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train.samples[i].id == b.train.samples[i].id);
  const auto total = ds.class_counts();
  for (int k = 0; k < 2; ++k) {
    const double expect = 0.7 * static_cast<double>(total[static_cast<std::size_t>(k)]);
    CHECK(std::abs(static_cast<double>(a.train.class_counts()[static_cast<std::size_t>(k)]) - expect) <= 1.0);
  }
  std::set<std::string> ids;
  for (const auto& s : a.train.samples) ids.insert(s.id);
  for (const auto& s : a.test.samples) CHECK(ids.count(s.id) == 0);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.toggles.use_ar = false;
  CHECK_NOTHROW(c.validate());
  c.lr = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("every variant logs a consistent loss breakdown") {
  const auto ds = tiny_dataset(48);
  const auto mapping = annulus_mapping();
  std::set<std::vector<double>> objectives;
  for (Variant v : {Variant::vae, Variant::beta_vae, Variant::ar_vae, Variant::attri_vae}) {
    auto cfg = quick_config(v, 2);
    auto model = fresh_model(cfg);
    const auto result = train(model, ds, mapping, cfg);
    REQUIRE(result.log.size() == 2);
    const double beta = effective_beta(cfg.weights, cfg.toggles);
    for (const auto& row : result.log) {
      const auto& t = row.train;
      CHECK(std::abs(t.total - (t.recon + beta * t.kl + t.mlp + cfg.weights.gamma * t.ar)) <= 1e-6);
      CHECK((t.mlp != 0.0) == cfg.toggles.use_mlp);
      CHECK((t.ar != 0.0) == cfg.toggles.use_ar);
      REQUIRE(row.validation.has_value());
    }
    objectives.insert({beta, cfg.toggles.use_mlp ? 1.0 : 0.0, cfg.toggles.use_ar ? 1.0 : 0.0});
  }
  CHECK(objectives.size() == 4);
}

TEST_CASE("plain VAE training reduces reconstruction plus KL") {
  const auto ds = tiny_dataset(64);
  auto cfg = quick_config(Variant::vae, 20);
  cfg.weights.gamma = 0;
  auto model = fresh_model(cfg);
  const auto result = train(model, ds, annulus_mapping(), cfg);
  CHECK(moving_average(result.log, 15, 5) < moving_average(result.log, 0, 5));
}

TEST_CASE("attribute regularization decreases during training") {
  const auto ds = tiny_dataset(64);
  auto cfg = quick_config(Variant::ar_vae, 100);
  cfg.validate_every = 50;
  auto model = fresh_model(cfg);
  const auto result = train(model, ds, annulus_mapping(), cfg);
  CHECK(result.log.back().train.ar < result.log.front().train.ar);
}

TEST_CASE("checkpoint reload reproduces the evaluation loss") {
  test_support::ScratchDir dir("checkpoint");
  const auto ds = tiny_dataset(40);
  const auto mapping = annulus_mapping();
  auto cfg = quick_config(Variant::attri_vae, 2);
  auto model = fresh_model(cfg);
  const auto result = train(model, ds, mapping, cfg);
  save_checkpoint(result.final_checkpoint, dir.path() / "ck");
  const auto loaded = load_checkpoint(dir.path() / "ck");
  CHECK(loaded.epoch == 2);
  CHECK(loaded.dataset_hash == dataset_content_hash(ds));
  CHECK(loaded.mapping.entries == mapping.entries);
  const auto restored = restore(loaded);
  const auto before = evaluation_loss(model, ds, mapping, cfg.weights, cfg.toggles, 16);
  const auto after = evaluation_loss(restored, ds, mapping, cfg.weights, cfg.toggles, 16);
  CHECK(std::abs(before.total - after.total) <= 1e-6 * std::max(1.0, std::abs(before.total)));
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing"), ConfigError);
}

TEST_CASE("non-finite losses abort training") {
  const auto ds = tiny_dataset(40);
  auto cfg = quick_config(Variant::attri_vae, 3);
  auto model = fresh_model(cfg);
  for (auto* p : model.parameters()) p->value[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train(model, ds, annulus_mapping(), cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto ds = tiny_dataset(40);
  auto cfg = quick_config(Variant::attri_vae, 2);
  auto a = fresh_model(cfg), b = fresh_model(cfg);
  const auto ra = train(a, ds, annulus_mapping(), cfg);
  const auto rb = train(b, ds, annulus_mapping(), cfg);
  CHECK(ra.final_checkpoint.tensors == rb.final_checkpoint.tensors);
  CHECK(ra.log.back().train.total == rb.log.back().train.total);
}

TEST_CASE("sweep and log tables") {
  test_support::ScratchDir dir("sweep");
  const auto ds = tiny_dataset(40);
  auto cfg = quick_config(Variant::attri_vae, 1);
  SweepGrid grid;
  grid.gamma = {0, 200};
  grid.delta = {5, 10};
  std::vector<ModelCheckpoint> cks;
  const auto rows = hyperparameter_sweep(test_support::tiny_config(), ds, annulus_mapping(), cfg, grid, {}, &cks);
  CHECK(rows.size() == grid.size());
  CHECK(cks.size() == grid.size());
  CHECK(rows[1].delta == 10);
  CHECK(rows[2].gamma == 200);
  write_sweep_table(rows, dir.path() / "s.csv");
  std::ifstream in(dir.path() / "s.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "beta,gamma,delta,interpretability,image_mi");
  const SweepGrid defaults;
  CHECK(std::find(defaults.gamma.begin(), defaults.gamma.end(), 200.0) != defaults.gamma.end());
  CHECK(defaults.beta == std::vector<double>{2.0});
  CHECK(defaults.delta == std::vector<double>{10.0});
}
