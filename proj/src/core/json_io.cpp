#include "core/json_io.hpp"

#include <cmath>

namespace attrivae::json_io {

namespace {

std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

template <std::size_t N>
void read_int_array(const Json& j, const std::string& where, std::array<int, N>& out) {
  if (!j.is_array() || j.size() != N)
    throw ConfigError(where + ": expected an array of " + std::to_string(N) + " integers");
  for (std::size_t i = 0; i < N; ++i)
    out[i] = static_cast<int>(get_int(j[i], where + "[" + std::to_string(i) + "]"));
}

}  // namespace

void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError((where.empty() ? std::string("config") : where) + ": expected an object");
}

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + join(where, key) + "'");
  }
}

double get_double(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
  return v;
}

long long get_int(const Json& j, const std::string& where) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long long>(v);
  }
  throw ConfigError(where + ": expected an integer");
}

bool get_bool(const Json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

std::string get_string(const Json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

Json to_json(const VariantToggles& t) {
  return Json{{"use_beta", t.use_beta}, {"use_mlp", t.use_mlp}, {"use_ar", t.use_ar}};
}

Json to_json(const ModelConfig& c) {
  Json j;
  j["latent_dim"] = c.latent_dim;
  j["embedding_dim"] = c.embedding_dim;
  j["conv_channels"] = c.conv_channels;
  j["fc_hidden"] = c.fc_hidden;
  j["mlp_hidden"] = c.mlp_hidden;
  j["image_shape"] = {c.image_shape.x, c.image_shape.y, c.image_shape.z};
  j["recon_loss_kind"] = to_string(c.recon_loss_kind);
  j["toggles"] = to_json(c.toggles);
  return j;
}

Json to_json(const LossWeights& w) { return Json{{"beta", w.beta}, {"gamma", w.gamma}, {"delta", w.delta}}; }

Json to_json(const AttributeMapping& m) {
  Json j = Json::array();
  for (const auto& [name, dim] : m.entries) j.push_back(Json{{"attribute", name}, {"dim", dim}});
  return j;
}

Json to_json(const nn::Adam::Settings& s) {
  return Json{{"lr", s.lr}, {"beta1", s.beta1}, {"beta2", s.beta2}, {"epsilon", s.epsilon}};
}

void read(const Json& j, const std::string& where, VariantToggles& t) {
  reject_unknown_keys(j, {"use_beta", "use_mlp", "use_ar"}, where);
  if (j.contains("use_beta")) t.use_beta = get_bool(j["use_beta"], join(where, "use_beta"));
  if (j.contains("use_mlp")) t.use_mlp = get_bool(j["use_mlp"], join(where, "use_mlp"));
  if (j.contains("use_ar")) t.use_ar = get_bool(j["use_ar"], join(where, "use_ar"));
}

void read(const Json& j, const std::string& where, ModelConfig& c) {
  reject_unknown_keys(j,
                      {"latent_dim", "embedding_dim", "conv_channels", "fc_hidden", "mlp_hidden", "image_shape",
                       "recon_loss_kind", "toggles"},
                      where);
  if (j.contains("latent_dim")) c.latent_dim = static_cast<int>(get_int(j["latent_dim"], join(where, "latent_dim")));
  if (j.contains("embedding_dim"))
    c.embedding_dim = static_cast<int>(get_int(j["embedding_dim"], join(where, "embedding_dim")));
  if (j.contains("conv_channels")) read_int_array(j["conv_channels"], join(where, "conv_channels"), c.conv_channels);
  if (j.contains("fc_hidden")) read_int_array(j["fc_hidden"], join(where, "fc_hidden"), c.fc_hidden);
  if (j.contains("mlp_hidden")) read_int_array(j["mlp_hidden"], join(where, "mlp_hidden"), c.mlp_hidden);
  if (j.contains("image_shape")) {
    const auto& s = j["image_shape"];
    const std::string w = join(where, "image_shape");
    if (!s.is_array() || s.size() < 2 || s.size() > 3) throw ConfigError(w + ": expected [X, Y] or [X, Y, Z]");
    c.image_shape.x = static_cast<int>(get_int(s[0], w + "[0]"));
    c.image_shape.y = static_cast<int>(get_int(s[1], w + "[1]"));
    c.image_shape.z = s.size() == 3 ? static_cast<int>(get_int(s[2], w + "[2]")) : 1;
  }
  if (j.contains("recon_loss_kind")) {
    try {
      c.recon_loss_kind = parse_recon_kind(get_string(j["recon_loss_kind"], join(where, "recon_loss_kind")));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(join(where, e.what()));
    }
  }
  if (j.contains("toggles")) read(j["toggles"], join(where, "toggles"), c.toggles);
}

void read(const Json& j, const std::string& where, LossWeights& w) {
  reject_unknown_keys(j, {"beta", "gamma", "delta"}, where);
  if (j.contains("beta")) w.beta = get_double(j["beta"], join(where, "beta"));
  if (j.contains("gamma")) w.gamma = get_double(j["gamma"], join(where, "gamma"));
  if (j.contains("delta")) w.delta = get_double(j["delta"], join(where, "delta"));
}

void read(const Json& j, const std::string& where, AttributeMapping& m) {
  m.entries.clear();
  // Either [{"attribute": name, "dim": d}, ...] or {"name": d, ...}.
  if (j.is_object()) {
    for (const auto& [key, value] : j.items())
      m.entries.emplace_back(key, static_cast<int>(get_int(value, join(where, key))));
    return;
  }
  if (!j.is_array()) throw ConfigError(where + ": expected an array of {attribute, dim} objects");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    reject_unknown_keys(j[i], {"attribute", "dim"}, w);
    if (!j[i].contains("attribute") || !j[i].contains("dim")) throw ConfigError(w + ": needs 'attribute' and 'dim'");
    m.entries.emplace_back(get_string(j[i]["attribute"], w + ".attribute"),
                           static_cast<int>(get_int(j[i]["dim"], w + ".dim")));
  }
}

void read(const Json& j, const std::string& where, nn::Adam::Settings& s) {
  reject_unknown_keys(j, {"lr", "beta1", "beta2", "epsilon"}, where);
  if (j.contains("lr")) s.lr = get_double(j["lr"], join(where, "lr"));
  if (j.contains("beta1")) s.beta1 = get_double(j["beta1"], join(where, "beta1"));
  if (j.contains("beta2")) s.beta2 = get_double(j["beta2"], join(where, "beta2"));
  if (j.contains("epsilon")) s.epsilon = get_double(j["epsilon"], join(where, "epsilon"));
}

}  // namespace attrivae::json_io
