#pragma once

// Run configuration shared by every command: one JSON document plus
// `key.path=value` overrides, validated as a whole before any side effect.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/dataio.hpp"
#include "core/json_io.hpp"
#include "core/losses.hpp"
#include "core/model.hpp"
#include "core/train.hpp"

namespace attrivae {

struct DataConfig {
  // Default to <output_dir>/data/{volumes,attributes.csv}, where synth writes.
  std::optional<std::filesystem::path> volume_dir;
  std::optional<std::filesystem::path> attribute_table;
  AnnulusSpec synthetic;
  // When positive, keep this many attributes chosen by recursive feature
  // elimination for the automatic mapping.
  int rfe_keep = 0;
};

struct EvalConfig {
  std::optional<std::filesystem::path> checkpoint;  // default <output_dir>/checkpoint/final
  std::string split = "test";                        // "test" or "all"
  int bins = 20;
};

struct TraverseConfig {
  std::vector<std::string> between;  // two sample ids
  std::vector<std::string> scan;     // attribute names
  std::string sample;                // base sample for scans (default: first test sample)
  int steps = 7;
  double coverage = 0.98;
  bool attend = false;
  double alpha = 0.5;
};

struct AttendConfig {
  std::vector<std::string> samples;     // default: first test sample
  std::vector<std::string> attributes;  // default: every mapped attribute
  double alpha = 0.5;
  bool save_raw = false;
  bool sampled_z = false;  // gradient through z = mu + noise * sigma
};

struct ProjectConfig {
  std::string attr_x;
  std::string attr_y;
};

struct RunConfig {
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  Variant variant = Variant::attri_vae;
  ModelConfig model;
  LossWeights loss;
  std::optional<AttributeMapping> mapping;  // absent: dataset attributes -> dims 0..K-1
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  TraverseConfig traverse;
  AttendConfig attend;
  ProjectConfig project;
  SweepGrid sweep;

  std::filesystem::path volume_dir() const;
  std::filesystem::path attribute_table() const;
  std::filesystem::path checkpoint_dir() const;
  // Throws ConfigError.
  void validate() const;
};

// Applies `a.b.c=value`; the value is parsed as JSON when possible and taken
// as a plain string otherwise.
void apply_override(json_io::Json& doc, const std::string& assignment);

RunConfig parse_run_config(const json_io::Json& doc);
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);
json_io::Json to_json(const RunConfig& config);

}  // namespace attrivae
