#include <doctest.h>

#include <fstream>

#include "core/config.hpp"
#include "core/errors.hpp"
#include "test_support.hpp"

using namespace attrivae;
using json_io::Json;

TEST_CASE("defaults") {
  const auto c = parse_run_config(Json::object());
  CHECK(c.variant == Variant::attri_vae);
  CHECK(c.model.toggles == VariantToggles{true, true, true});
  CHECK(c.model.latent_dim == 64);
  CHECK(c.loss.beta == 2.0);
  CHECK(c.loss.gamma == 200.0);
  CHECK(c.loss.delta == 10.0);
  CHECK(c.train.lr == 1e-4);
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.split_fraction == 0.7);
  CHECK(c.checkpoint_dir() == std::filesystem::path("out") / "checkpoint" / "final");
}

TEST_CASE("variant selects the toggles") {
  const auto vae = parse_run_config(Json{{"variant", "vae"}});
  CHECK(vae.model.toggles == VariantToggles{false, false, false});
  CHECK(vae.train.toggles == vae.model.toggles);
  CHECK(effective_beta(vae.train.weights, vae.train.toggles) == 1.0);
  CHECK_THROWS_AS(parse_run_config(Json{{"variant", "gan"}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(Json{{"model", {{"toggles", {{"use_ar", false}}}}}}), ConfigError);
}

TEST_CASE("unknown keys and bad values are rejected with a path") {
  try {
    parse_run_config(Json{{"train", {{"epoch", 3}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config(Json{{"train", {{"lr", "fast"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(Json{{"mapping", {{"cavity_area", 64}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(Json{{"mapping", {{"a", 1}, {"b", 1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_run_config(Json{{"eval", {{"split", "train"}}}}), ConfigError);
}

TEST_CASE("overrides") {
  Json doc = Json::object();
  apply_override(doc, "train.epochs=7");
  apply_override(doc, "output_dir=runs/a");
  apply_override(doc, "sweep.gamma=[0,100]");
  apply_override(doc, "mapping.cavity_area=5");
  const auto c = parse_run_config(doc);
  CHECK(c.train.epochs == 7);
  CHECK(c.output_dir == "runs/a");
  CHECK(c.sweep.gamma == std::vector<double>{0, 100});
  REQUIRE(c.mapping.has_value());
  CHECK(c.mapping->dim_of("cavity_area") == 5);
  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
}

TEST_CASE("config file plus overrides, and JSON round trip") {
  test_support::ScratchDir dir("config");
  {
    std::ofstream f(dir.path() / "c.json");
    f << R"({"seed": 5, "train": {"epochs": 3}, "variant": "beta_vae"})";
  }
  const auto c = load_run_config(dir.path() / "c.json", {"train.epochs=4"});
  CHECK(c.seed == 5);
  CHECK(c.train.seed == 5);
  CHECK(c.train.epochs == 4);
  CHECK(c.variant == Variant::beta_vae);
  const auto again = parse_run_config(to_json(c));
  CHECK(to_json(again) == to_json(c));
  CHECK_THROWS_AS(load_run_config(dir.path() / "absent.json", {}), ConfigError);
}
