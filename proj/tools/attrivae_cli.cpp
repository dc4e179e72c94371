#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attrivae/attrivae.h"

namespace {

constexpr int kExitConfig = 2;

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  std::string output;
  std::string variant;
  bool quiet = false;

  std::vector<std::string> between;
  std::vector<std::string> scan;
  int steps = 0;
  bool attend = false;
  std::string sample;
  std::string checkpoint;
  std::string attr_x;
  std::string attr_y;
  std::vector<std::string> attend_samples;
  std::vector<std::string> attend_attributes;
};

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

std::string quoted_list(const std::vector<std::string>& v) { return nlohmann::json(v).dump(); }

// Convenience flags are sugar for `--set`; explicit `--set` wins because it
// is applied last.
std::vector<std::string> collect_overrides(const Options& o) {
  std::vector<std::string> out;
  if (!o.seed.empty()) out.push_back("seed=" + o.seed);
  if (!o.output.empty()) out.push_back("output_dir=" + quoted(o.output));
  if (!o.variant.empty()) out.push_back("variant=" + quoted(o.variant));
  if (!o.between.empty()) out.push_back("traverse.between=" + quoted_list(o.between));
  if (!o.scan.empty()) out.push_back("traverse.scan=" + quoted_list(o.scan));
  if (o.steps > 0) out.push_back("traverse.steps=" + std::to_string(o.steps));
  if (o.attend) out.push_back("traverse.attend=true");
  if (!o.sample.empty()) out.push_back("traverse.sample=" + quoted(o.sample));
  if (!o.checkpoint.empty()) out.push_back("eval.checkpoint=" + quoted(o.checkpoint));
  if (!o.attr_x.empty()) out.push_back("project.attr_x=" + quoted(o.attr_x));
  if (!o.attr_y.empty()) out.push_back("project.attr_y=" + quoted(o.attr_y));
  if (!o.attend_samples.empty()) out.push_back("attend.samples=" + quoted_list(o.attend_samples));
  if (!o.attend_attributes.empty()) out.push_back("attend.attributes=" + quoted_list(o.attend_attributes));
  out.insert(out.end(), o.sets.begin(), o.sets.end());
  return out;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "Override a config key, e.g. --set train.epochs=50")->take_all();
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("-o,--output", o.output, "Output directory");
  cmd->add_option("--variant", o.variant, "vae, beta_vae, ar_vae or attri_vae");
  cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint directory");
  cmd->add_flag("-q,--quiet", o.quiet, "Suppress progress lines");
}

void print_line(const char* line, void*) {
  std::cerr << line << '\n';
}

int exit_code(attrivae_status status) {
  switch (status) {
    case ATTRIVAE_OK:
      return 0;
    case ATTRIVAE_ERR_CONFIG:
      return kExitConfig;
    case ATTRIVAE_ERR_NUMERICAL:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute-regularized VAE toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", attrivae_version());

  Options o;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic annulus dataset");
  auto* train = app.add_subcommand("train", "Train a model");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write metrics.json");
  auto* traverse = app.add_subcommand("traverse", "Latent interpolation and attribute scanning");
  auto* attend = app.add_subcommand("attend", "Attribute attention maps");
  auto* project = app.add_subcommand("project", "Scatter of two regularized dimensions");
  auto* sweep = app.add_subcommand("sweep", "Hyperparameter sweep over beta, gamma, delta");
  for (auto* cmd : {synth, train, eval, traverse, attend, project, sweep}) add_common(cmd, o);

  traverse->add_option("--between", o.between, "Interpolate between two sample ids")->expected(2);
  traverse->add_option("--scan", o.scan, "Scan the regularized dimension of these attributes");
  traverse->add_option("--steps", o.steps, "Number of steps per row")->check(CLI::PositiveNumber);
  traverse->add_flag("--attend", o.attend, "Add attention overlays under every scan row");
  traverse->add_option("--sample", o.sample, "Base sample id for scans");
  attend->add_option("--samples", o.attend_samples, "Sample ids");
  attend->add_option("--attributes", o.attend_attributes, "Attribute names");
  project->add_option("--x", o.attr_x, "Attribute on the horizontal axis");
  project->add_option("--y", o.attr_y, "Attribute on the vertical axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const auto overrides = collect_overrides(o);
  std::vector<const char*> raw;
  raw.reserve(overrides.size());
  for (const auto& s : overrides) raw.push_back(s.c_str());

  attrivae_config* config = nullptr;
  attrivae_status status =
      attrivae_config_load(o.config_path.empty() ? nullptr : o.config_path.c_str(), raw.data(), raw.size(), &config);
  if (status != ATTRIVAE_OK) {
    std::cerr << "error: " << attrivae_last_error() << '\n';
    return exit_code(status);
  }

  char* summary = nullptr;
  status = attrivae_run(config, command.c_str(), o.quiet ? nullptr : print_line, nullptr, &summary);
  attrivae_config_free(config);
  if (status != ATTRIVAE_OK) {
    std::cerr << "error: " << attrivae_last_error() << '\n';
    return exit_code(status);
  }
  if (summary) {
    std::cout << summary;
    if (*summary && summary[std::char_traits<char>::length(summary) - 1] != '\n') std::cout << '\n';
    attrivae_string_free(summary);
  }
  return 0;
}
