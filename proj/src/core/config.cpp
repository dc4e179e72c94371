#include "core/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace attrivae {

namespace fs = std::filesystem;
using json_io::Json;
using json_io::get_bool;
using json_io::get_double;
using json_io::get_int;
using json_io::get_string;
using json_io::reject_unknown_keys;

namespace {

Range read_range(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected [lo, hi]");
  return {get_double(j[0], where + "[0]"), get_double(j[1], where + "[1]")};
}

std::vector<std::string> read_strings(const Json& j, const std::string& where) {
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) throw ConfigError(where + ": expected a list of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> read_doubles(const Json& j, const std::string& where) {
  if (j.is_number()) return {get_double(j, where)};
  if (!j.is_array()) throw ConfigError(where + ": expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_double(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

int read_int(const Json& j, const std::string& where) {
  const long long v = get_int(j, where);
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(where + ": out of range");
  return static_cast<int>(v);
}

void read_synthetic(const Json& j, AnnulusSpec& s) {
  const std::string w = "data.synthetic";
  reject_unknown_keys(j,
                      {"n_samples", "image_size", "dimensions", "outer_radius", "wall_thickness", "wall_intensity",
                       "scar_fraction", "scar_probability", "seed"},
                      w);
  if (j.contains("n_samples")) s.n_samples = read_int(j["n_samples"], w + ".n_samples");
  if (j.contains("image_size")) s.image_size = read_int(j["image_size"], w + ".image_size");
  if (j.contains("dimensions")) s.dimensions = read_int(j["dimensions"], w + ".dimensions");
  if (j.contains("outer_radius")) s.outer_radius = read_range(j["outer_radius"], w + ".outer_radius");
  if (j.contains("wall_thickness")) s.wall_thickness = read_range(j["wall_thickness"], w + ".wall_thickness");
  if (j.contains("wall_intensity")) s.wall_intensity = read_range(j["wall_intensity"], w + ".wall_intensity");
  if (j.contains("scar_fraction")) s.scar_fraction = read_range(j["scar_fraction"], w + ".scar_fraction");
  if (j.contains("scar_probability")) s.scar_probability = get_double(j["scar_probability"], w + ".scar_probability");
  if (j.contains("seed")) s.seed = static_cast<std::uint64_t>(get_int(j["seed"], w + ".seed"));
}

void read_train(const Json& j, TrainConfig& t) {
  const std::string w = "train";
  reject_unknown_keys(j,
                      {"lr", "batch_size", "epochs", "split_fraction", "oversample", "early_stop", "patience",
                       "snapshot_every", "validate_every"},
                      w);
  if (j.contains("lr")) t.lr = get_double(j["lr"], w + ".lr");
  if (j.contains("batch_size")) t.batch_size = read_int(j["batch_size"], w + ".batch_size");
  if (j.contains("epochs")) t.epochs = read_int(j["epochs"], w + ".epochs");
  if (j.contains("split_fraction")) t.split_fraction = get_double(j["split_fraction"], w + ".split_fraction");
  if (j.contains("oversample")) t.oversample = get_bool(j["oversample"], w + ".oversample");
  if (j.contains("early_stop")) t.early_stop = get_bool(j["early_stop"], w + ".early_stop");
  if (j.contains("patience")) t.patience = read_int(j["patience"], w + ".patience");
  if (j.contains("snapshot_every")) t.snapshot_every = read_int(j["snapshot_every"], w + ".snapshot_every");
  if (j.contains("validate_every")) t.validate_every = read_int(j["validate_every"], w + ".validate_every");
}

Json range_json(const Range& r) { return Json::array({r.lo, r.hi}); }

}  // namespace

fs::path RunConfig::volume_dir() const { return data.volume_dir.value_or(output_dir / "data" / "volumes"); }

fs::path RunConfig::attribute_table() const {
  return data.attribute_table.value_or(output_dir / "data" / "attributes.csv");
}

fs::path RunConfig::checkpoint_dir() const { return eval.checkpoint.value_or(output_dir / "checkpoint" / "final"); }

void RunConfig::validate() const {
  auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  };
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  wrap([&] { model.validate(); });
  wrap([&] { loss.validate(); });
  wrap([&] { train.validate(); });
  wrap([&] { data.synthetic.validate(); });
  if (!(model.toggles == toggles_for(variant))) throw ConfigError("model toggles must follow the variant");
  if (mapping) wrap([&] { mapping->validate(model.latent_dim); });
  if (data.rfe_keep < 0) throw ConfigError("data.rfe_keep must be nonnegative");
  if (eval.split != "test" && eval.split != "all") throw ConfigError("eval.split: expected 'test' or 'all'");
  if (eval.bins < 2) throw ConfigError("eval.bins must be at least 2");
  if (traverse.steps < 2) throw ConfigError("traverse.steps must be at least 2");
  if (!(traverse.coverage > 0.0 && traverse.coverage <= 1.0)) throw ConfigError("traverse.coverage must lie in (0, 1]");
  if (!traverse.between.empty() && traverse.between.size() != 2)
    throw ConfigError("traverse.between: expected exactly two sample ids");
  if (!(traverse.alpha >= 0.0 && traverse.alpha <= 1.0)) throw ConfigError("traverse.alpha must lie in [0, 1]");
  if (!(attend.alpha >= 0.0 && attend.alpha <= 1.0)) throw ConfigError("attend.alpha must lie in [0, 1]");
  if (sweep.size() == 0) throw ConfigError("sweep: every grid axis needs at least one value");
  for (double b : sweep.beta)
    if (b < 0) throw ConfigError("sweep.beta values must be nonnegative");
  for (double g : sweep.gamma)
    if (g < 0) throw ConfigError("sweep.gamma values must be nonnegative");
  for (double d : sweep.delta)
    if (d <= 0) throw ConfigError("sweep.delta values must be positive");
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const std::exception&) {
    value = text;
  }
  Json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override '" + assignment + "': '" + parts[i] + "' is not an object");
    if (!node->contains(parts[i])) (*node)[parts[i]] = Json::object();
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) throw ConfigError("override '" + assignment + "': parent is not an object");
  (*node)[parts.back()] = value;
}

RunConfig parse_run_config(const Json& doc) {
  RunConfig c;
  reject_unknown_keys(doc,
                      {"output_dir", "seed", "variant", "model", "loss", "mapping", "train", "data", "eval",
                       "traverse", "attend", "project", "sweep"},
                      "");
  if (doc.contains("output_dir")) c.output_dir = get_string(doc["output_dir"], "output_dir");
  if (doc.contains("seed")) {
    const long long s = get_int(doc["seed"], "seed");
    if (s < 0) throw ConfigError("seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("variant")) {
    try {
      c.variant = parse_variant(get_string(doc["variant"], "variant"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (doc.contains("model")) {
    if (doc["model"].is_object() && doc["model"].contains("toggles"))
      throw ConfigError("model.toggles is derived from 'variant'; set the variant instead");
    json_io::read(doc["model"], "model", c.model);
  }
  c.model.toggles = toggles_for(c.variant);
  if (doc.contains("loss")) json_io::read(doc["loss"], "loss", c.loss);
  if (doc.contains("mapping") && !doc["mapping"].is_null()) {
    AttributeMapping m;
    json_io::read(doc["mapping"], "mapping", m);
    c.mapping = m;
  }
  if (doc.contains("train")) read_train(doc["train"], c.train);
  c.train.seed = c.seed;
  c.train.toggles = c.model.toggles;
  c.train.weights = c.loss;

  if (doc.contains("data")) {
    const auto& d = doc["data"];
    reject_unknown_keys(d, {"volume_dir", "attribute_table", "synthetic", "rfe_keep"}, "data");
    if (d.contains("volume_dir")) c.data.volume_dir = get_string(d["volume_dir"], "data.volume_dir");
    if (d.contains("attribute_table")) c.data.attribute_table = get_string(d["attribute_table"], "data.attribute_table");
    if (d.contains("synthetic")) read_synthetic(d["synthetic"], c.data.synthetic);
    if (d.contains("rfe_keep")) c.data.rfe_keep = read_int(d["rfe_keep"], "data.rfe_keep");
  }
  if (doc.contains("eval")) {
    const auto& e = doc["eval"];
    reject_unknown_keys(e, {"checkpoint", "split", "bins"}, "eval");
    if (e.contains("checkpoint")) c.eval.checkpoint = get_string(e["checkpoint"], "eval.checkpoint");
    if (e.contains("split")) c.eval.split = get_string(e["split"], "eval.split");
    if (e.contains("bins")) c.eval.bins = read_int(e["bins"], "eval.bins");
  }
  if (doc.contains("traverse")) {
    const auto& t = doc["traverse"];
    reject_unknown_keys(t, {"between", "scan", "sample", "steps", "coverage", "attend", "alpha"}, "traverse");
    if (t.contains("between")) c.traverse.between = read_strings(t["between"], "traverse.between");
    if (t.contains("scan")) c.traverse.scan = read_strings(t["scan"], "traverse.scan");
    if (t.contains("sample")) c.traverse.sample = get_string(t["sample"], "traverse.sample");
    if (t.contains("steps")) c.traverse.steps = read_int(t["steps"], "traverse.steps");
    if (t.contains("coverage")) c.traverse.coverage = get_double(t["coverage"], "traverse.coverage");
    if (t.contains("attend")) c.traverse.attend = get_bool(t["attend"], "traverse.attend");
    if (t.contains("alpha")) c.traverse.alpha = get_double(t["alpha"], "traverse.alpha");
  }
  if (doc.contains("attend")) {
    const auto& a = doc["attend"];
    reject_unknown_keys(a, {"samples", "attributes", "alpha", "save_raw", "sampled_z"}, "attend");
    if (a.contains("samples")) c.attend.samples = read_strings(a["samples"], "attend.samples");
    if (a.contains("attributes")) c.attend.attributes = read_strings(a["attributes"], "attend.attributes");
    if (a.contains("alpha")) c.attend.alpha = get_double(a["alpha"], "attend.alpha");
    if (a.contains("save_raw")) c.attend.save_raw = get_bool(a["save_raw"], "attend.save_raw");
    if (a.contains("sampled_z")) c.attend.sampled_z = get_bool(a["sampled_z"], "attend.sampled_z");
  }
  if (doc.contains("project")) {
    const auto& p = doc["project"];
    reject_unknown_keys(p, {"attr_x", "attr_y"}, "project");
    if (p.contains("attr_x")) c.project.attr_x = get_string(p["attr_x"], "project.attr_x");
    if (p.contains("attr_y")) c.project.attr_y = get_string(p["attr_y"], "project.attr_y");
  }
  if (doc.contains("sweep")) {
    const auto& s = doc["sweep"];
    reject_unknown_keys(s, {"beta", "gamma", "delta"}, "sweep");
    if (s.contains("beta")) c.sweep.beta = read_doubles(s["beta"], "sweep.beta");
    if (s.contains("gamma")) c.sweep.gamma = read_doubles(s["gamma"], "sweep.gamma");
    if (s.contains("delta")) c.sweep.delta = read_doubles(s["delta"], "sweep.delta");
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
  Json doc = Json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    try {
      doc = Json::parse(in);
    } catch (const std::exception& e) {
      throw ConfigError("config file " + file->string() + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_run_config(doc);
}

Json to_json(const RunConfig& c) {
  Json j;
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  j["variant"] = to_string(c.variant);
  Json model = json_io::to_json(c.model);
  model.erase("toggles");
  j["model"] = model;
  j["loss"] = json_io::to_json(c.loss);
  j["mapping"] = c.mapping ? json_io::to_json(*c.mapping) : Json(nullptr);
  j["train"] = Json{{"lr", c.train.lr},
                    {"batch_size", c.train.batch_size},
                    {"epochs", c.train.epochs},
                    {"split_fraction", c.train.split_fraction},
                    {"oversample", c.train.oversample},
                    {"early_stop", c.train.early_stop},
                    {"patience", c.train.patience},
                    {"snapshot_every", c.train.snapshot_every},
                    {"validate_every", c.train.validate_every}};
  const auto& s = c.data.synthetic;
  Json data;
  data["volume_dir"] = c.volume_dir().string();
  data["attribute_table"] = c.attribute_table().string();
  data["synthetic"] = Json{{"n_samples", s.n_samples},
                           {"image_size", s.image_size},
                           {"dimensions", s.dimensions},
                           {"outer_radius", range_json(s.outer_radius)},
                           {"wall_thickness", range_json(s.wall_thickness)},
                           {"wall_intensity", range_json(s.wall_intensity)},
                           {"scar_fraction", range_json(s.scar_fraction)},
                           {"scar_probability", s.scar_probability},
                           {"seed", s.seed}};
  data["rfe_keep"] = c.data.rfe_keep;
  j["data"] = data;
  j["eval"] = Json{{"checkpoint", c.checkpoint_dir().string()}, {"split", c.eval.split}, {"bins", c.eval.bins}};
  j["traverse"] = Json{{"between", c.traverse.between}, {"scan", c.traverse.scan},   {"sample", c.traverse.sample},
                       {"steps", c.traverse.steps},     {"coverage", c.traverse.coverage},
                       {"attend", c.traverse.attend},   {"alpha", c.traverse.alpha}};
  j["attend"] = Json{{"samples", c.attend.samples},
                     {"attributes", c.attend.attributes},
                     {"alpha", c.attend.alpha},
                     {"save_raw", c.attend.save_raw},
                     {"sampled_z", c.attend.sampled_z}};
  j["project"] = Json{{"attr_x", c.project.attr_x}, {"attr_y", c.project.attr_y}};
  j["sweep"] = Json{{"beta", c.sweep.beta}, {"gamma", c.sweep.gamma}, {"delta", c.sweep.delta}};
  return j;
}

}  // namespace attrivae
