#include "attrivae/attrivae.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "core/attention.hpp"
#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/errors.hpp"
#include "core/losses.hpp"
#include "core/pipeline.hpp"

struct attrivae_config {
  attrivae::json_io::Json doc;
  attrivae::RunConfig parsed;
};

struct attrivae_model {
  attrivae::ModelCheckpoint checkpoint;
  attrivae::Model<float> model;
};

namespace {

thread_local std::string g_last_error;

attrivae_status fail(attrivae_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
attrivae_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return ATTRIVAE_OK;
  } catch (const attrivae::NumericalError& e) {
    return fail(ATTRIVAE_ERR_NUMERICAL, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(ATTRIVAE_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ATTRIVAE_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(ATTRIVAE_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(ATTRIVAE_ERR_RUNTIME, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* message) {
  if (!ok) throw attrivae::ConfigError(message);
}

void check_voxels(const attrivae_model* m, size_t n) {
  const auto expected = m->checkpoint.model.image_shape.count();
  if (n != expected)
    throw attrivae::ConfigError("volume has " + std::to_string(n) + " voxels, model expects " +
                                std::to_string(expected));
}

}  // namespace

extern "C" {

const char* attrivae_version(void) { return "0.1.0"; }

const char* attrivae_last_error(void) { return g_last_error.c_str(); }

void attrivae_string_free(char* s) { std::free(s); }

attrivae_status attrivae_config_load(const char* json_path, const char* const* overrides, size_t n_overrides,
                                     attrivae_config** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    require(overrides != nullptr || n_overrides == 0, "overrides must not be null");
    auto* c = new attrivae_config;
    try {
      c->doc = attrivae::json_io::Json::object();
      if (json_path) {
        std::ifstream in(json_path);
        if (!in) throw attrivae::ConfigError(std::string("cannot open config file ") + json_path);
        try {
          c->doc = attrivae::json_io::Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw attrivae::ConfigError(std::string("config file ") + json_path + " is not valid JSON: " + e.what());
        }
      }
      for (size_t i = 0; i < n_overrides; ++i) attrivae::apply_override(c->doc, overrides[i]);
      c->parsed = attrivae::parse_run_config(c->doc);
    } catch (...) {
      delete c;
      throw;
    }
    *out = c;
  });
}

attrivae_status attrivae_config_from_string(const char* json_text, attrivae_config** out) {
  return guarded([&] {
    require(json_text != nullptr && out != nullptr, "arguments must not be null");
    auto* c = new attrivae_config;
    try {
      try {
        c->doc = attrivae::json_io::Json::parse(json_text);
      } catch (const nlohmann::json::exception& e) {
        throw attrivae::ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
      c->parsed = attrivae::parse_run_config(c->doc);
    } catch (...) {
      delete c;
      throw;
    }
    *out = c;
  });
}

attrivae_status attrivae_config_set(attrivae_config* config, const char* assignment) {
  return guarded([&] {
    require(config != nullptr && assignment != nullptr, "arguments must not be null");
    auto doc = config->doc;
    attrivae::apply_override(doc, assignment);
    config->parsed = attrivae::parse_run_config(doc);
    config->doc = std::move(doc);
  });
}

attrivae_status attrivae_config_to_json(const attrivae_config* config, char** out_json) {
  return guarded([&] {
    require(config != nullptr && out_json != nullptr, "arguments must not be null");
    *out_json = dup_string(attrivae::to_json(config->parsed).dump(2));
  });
}

void attrivae_config_free(attrivae_config* config) { delete config; }

attrivae_status attrivae_run(const attrivae_config* config, const char* command, attrivae_log_fn log, void* user,
                             char** out_summary) {
  return guarded([&] {
    require(config != nullptr && command != nullptr, "arguments must not be null");
    attrivae::Logger logger;
    if (log) logger = [log, user](const std::string& line) { log(line.c_str(), user); };
    const std::string summary = attrivae::run_command(command, config->parsed, logger);
    if (out_summary) *out_summary = dup_string(summary);
  });
}

attrivae_status attrivae_model_load(const char* checkpoint_dir, attrivae_model** out) {
  return guarded([&] {
    require(checkpoint_dir != nullptr && out != nullptr, "arguments must not be null");
    auto ck = attrivae::load_checkpoint(checkpoint_dir);
    auto model = attrivae::restore(ck);
    *out = new attrivae_model{std::move(ck), std::move(model)};
  });
}

void attrivae_model_free(attrivae_model* model) { delete model; }

int attrivae_model_latent_dim(const attrivae_model* model) { return model ? model->model.latent_dim() : 0; }

attrivae_status attrivae_model_image_shape(const attrivae_model* model, int shape[3]) {
  return guarded([&] {
    require(model != nullptr && shape != nullptr, "arguments must not be null");
    const auto e = model->checkpoint.model.image_shape;
    shape[0] = e.x;
    shape[1] = e.y;
    shape[2] = e.z;
  });
}

attrivae_status attrivae_model_mapped_dim(const attrivae_model* model, const char* attribute, int* dim) {
  return guarded([&] {
    require(model != nullptr && attribute != nullptr && dim != nullptr, "arguments must not be null");
    const auto d = model->checkpoint.mapping.dim_of(attribute);
    if (!d) throw attrivae::ConfigError(std::string("attribute '") + attribute + "' is not mapped");
    *dim = *d;
  });
}

attrivae_status attrivae_model_encode(const attrivae_model* model, const float* volume, size_t n_voxels, double* mu,
                                      double* logvar) {
  return guarded([&] {
    require(model != nullptr && volume != nullptr && mu != nullptr, "arguments must not be null");
    check_voxels(model, n_voxels);
    const std::vector<float> v(volume, volume + n_voxels);
    const auto lat = model->model.encode(attrivae::make_batch<float>({&v}, model->checkpoint.model.image_shape));
    for (Eigen::Index d = 0; d < lat.mu.rows(); ++d) {
      mu[d] = lat.mu(d, 0);
      if (logvar) logvar[d] = lat.logvar(d, 0);
    }
  });
}

attrivae_status attrivae_model_decode(const attrivae_model* model, const double* z, float* volume, size_t n_voxels) {
  return guarded([&] {
    require(model != nullptr && z != nullptr && volume != nullptr, "arguments must not be null");
    check_voxels(model, n_voxels);
    attrivae::nn::Matrix<float> zm(model->model.latent_dim(), 1);
    for (Eigen::Index d = 0; d < zm.rows(); ++d) zm(d, 0) = static_cast<float>(z[d]);
    const auto x = model->model.decode(zm);
    std::memcpy(volume, x.data.data(), n_voxels * sizeof(float));
  });
}

attrivae_status attrivae_model_classify(const attrivae_model* model, const double* z, double* probability) {
  return guarded([&] {
    require(model != nullptr && z != nullptr && probability != nullptr, "arguments must not be null");
    attrivae::nn::Matrix<float> zm(model->model.latent_dim(), 1);
    for (Eigen::Index d = 0; d < zm.rows(); ++d) zm(d, 0) = static_cast<float>(z[d]);
    *probability = model->model.classify(zm)(0, 0);
  });
}

attrivae_status attrivae_model_attention(const attrivae_model* model, const float* volume, size_t n_voxels, int dim,
                                         float* heat) {
  return guarded([&] {
    require(model != nullptr && volume != nullptr && heat != nullptr, "arguments must not be null");
    check_voxels(model, n_voxels);
    const auto map = attrivae::attention_map(model->model, std::span<const float>(volume, n_voxels), dim);
    std::memcpy(heat, map.heat.data(), n_voxels * sizeof(float));
  });
}

attrivae_status attrivae_kl_loss(const double* mu, const double* logvar, size_t n, size_t d, double* out) {
  return guarded([&] {
    require(mu != nullptr && logvar != nullptr && out != nullptr, "arguments must not be null");
    require(n > 0 && d > 0, "n and d must be positive");
    attrivae::nn::Matrix<double> m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    attrivae::nn::Matrix<double> l(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (size_t i = 0; i < n; ++i)
      for (size_t k = 0; k < d; ++k) {
        m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = mu[i * d + k];
        l(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = logvar[i * d + k];
      }
    *out = attrivae::kl_loss(m, l);
  });
}

attrivae_status attrivae_attr_reg_loss(const double* z_dim, const double* attr, size_t n, double delta, double* out) {
  return guarded([&] {
    require(z_dim != nullptr && attr != nullptr && out != nullptr, "arguments must not be null");
    attrivae::nn::Matrix<double> z(1, static_cast<Eigen::Index>(n));
    attrivae::nn::Matrix<double> a(static_cast<Eigen::Index>(n), 1);
    for (size_t i = 0; i < n; ++i) {
      z(0, static_cast<Eigen::Index>(i)) = z_dim[i];
      a(static_cast<Eigen::Index>(i), 0) = attr[i];
    }
    attrivae::AttributeMapping mapping;
    mapping.entries.emplace_back("a", 0);
    *out = attrivae::attr_reg_loss(z, a, mapping, delta);
  });
}

}  // extern "C"
