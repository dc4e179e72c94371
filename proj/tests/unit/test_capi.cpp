#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "attrivae/attrivae.h"
#include "test_support.hpp"

namespace {

void collect(const char* line, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(line); }

}  // namespace

TEST_CASE("C API error codes") {
  attrivae_config* cfg = nullptr;
  const char* bad[] = {"train.bogus=1"};
  CHECK(attrivae_config_load(nullptr, bad, 1, &cfg) == ATTRIVAE_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(attrivae_last_error()).find("bogus") != std::string::npos);
  CHECK(attrivae_config_from_string("{not json", &cfg) == ATTRIVAE_ERR_CONFIG);
  CHECK(attrivae_model_load("/nonexistent/checkpoint", nullptr) == ATTRIVAE_ERR_CONFIG);

  REQUIRE(attrivae_config_load(nullptr, nullptr, 0, &cfg) == ATTRIVAE_OK);
  CHECK(attrivae_config_set(cfg, "model.latent_dim=999") == ATTRIVAE_ERR_CONFIG);
  CHECK(attrivae_config_set(cfg, "train.epochs=2") == ATTRIVAE_OK);
  char* text = nullptr;
  REQUIRE(attrivae_config_to_json(cfg, &text) == ATTRIVAE_OK);
  CHECK(std::string(text).find("\"epochs\": 2") != std::string::npos);
  attrivae_string_free(text);
  CHECK(attrivae_run(cfg, "dance", nullptr, nullptr, nullptr) == ATTRIVAE_ERR_CONFIG);
  attrivae_config_free(cfg);
}

TEST_CASE("C API loss helpers") {
  const double zero[4] = {0, 0, 0, 0};
  double out = -1;
  REQUIRE(attrivae_kl_loss(zero, zero, 2, 2, &out) == ATTRIVAE_OK);
  CHECK(out == 0.0);
  const double mu[2] = {1, 0};
  REQUIRE(attrivae_kl_loss(mu, zero, 1, 2, &out) == ATTRIVAE_OK);
  CHECK(out == doctest::Approx(0.5));
  const double z[2] = {0, 10}, up[2] = {0, 1}, down[2] = {1, 0};
  REQUIRE(attrivae_attr_reg_loss(z, up, 2, 10.0, &out) == ATTRIVAE_OK);
  CHECK(out <= 1e-3);
  REQUIRE(attrivae_attr_reg_loss(z, down, 2, 10.0, &out) == ATTRIVAE_OK);
  CHECK(out == 1.0);
}

TEST_CASE("C API pipeline and model handle") {
  test_support::ScratchDir dir("capi");
  const std::string out = "output_dir=\"" + (dir.path() / "run").string() + "\"";
  const char* sets[] = {out.c_str(), "data.synthetic.n_samples=40", "train.epochs=1", "model.image_shape=[16,16]",
                        "data.synthetic.image_size=16", "data.synthetic.outer_radius=[4.5,7]",
                        "data.synthetic.wall_thickness=[1,3]"};
  attrivae_config* cfg = nullptr;
  REQUIRE_MESSAGE(attrivae_config_load(nullptr, sets, std::size(sets), &cfg) == ATTRIVAE_OK, attrivae_last_error());
  std::vector<std::string> lines;
  char* summary = nullptr;
  REQUIRE_MESSAGE(attrivae_run(cfg, "synth", collect, &lines, &summary) == ATTRIVAE_OK, attrivae_last_error());
  CHECK(std::string(summary).find("samples: 40") != std::string::npos);
  attrivae_string_free(summary);
  REQUIRE_MESSAGE(attrivae_run(cfg, "train", collect, &lines, nullptr) == ATTRIVAE_OK, attrivae_last_error());
  CHECK_FALSE(lines.empty());
  attrivae_config_free(cfg);

  attrivae_model* m = nullptr;
  REQUIRE_MESSAGE(attrivae_model_load((dir.path() / "run" / "checkpoint" / "final").c_str(), &m) == ATTRIVAE_OK,
                  attrivae_last_error());
  const int d = attrivae_model_latent_dim(m);
  CHECK(d == 64);
  int shape[3];
  REQUIRE(attrivae_model_image_shape(m, shape) == ATTRIVAE_OK);
  CHECK(shape[0] == 16);
  CHECK(shape[2] == 1);
  int dim = -1;
  CHECK(attrivae_model_mapped_dim(m, "wall_thickness", &dim) == ATTRIVAE_OK);
  CHECK(dim >= 0);
  CHECK(attrivae_model_mapped_dim(m, "nope", &dim) == ATTRIVAE_ERR_CONFIG);

  std::vector<float> x(256, 0.3f), recon(256), heat(256);
  std::vector<double> mean(static_cast<std::size_t>(d)), lv(static_cast<std::size_t>(d));
  REQUIRE(attrivae_model_encode(m, x.data(), x.size(), mean.data(), lv.data()) == ATTRIVAE_OK);
  CHECK(attrivae_model_encode(m, x.data(), 10, mean.data(), nullptr) == ATTRIVAE_ERR_CONFIG);
  REQUIRE(attrivae_model_decode(m, mean.data(), recon.data(), recon.size()) == ATTRIVAE_OK);
  for (float v : recon) CHECK((v > 0.0f && v < 1.0f));
  double p = -1;
  REQUIRE(attrivae_model_classify(m, mean.data(), &p) == ATTRIVAE_OK);
  CHECK((p > 0.0 && p < 1.0));
  REQUIRE(attrivae_model_attention(m, x.data(), x.size(), dim, heat.data()) == ATTRIVAE_OK);
  for (float v : heat) CHECK((v >= 0.0f && v <= 1.0f));
  attrivae_model_free(m);
}
