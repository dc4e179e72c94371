#pragma once

// The command implementations behind the CLI. Each validates the whole
// configuration first, writes only under `output_dir`, and returns a short
// human-readable summary.

#include <functional>
#include <string>

#include "core/config.hpp"

namespace attrivae {

using Logger = std::function<void(const std::string&)>;

std::string cmd_synth(const RunConfig& config, const Logger& log = {});
std::string cmd_train(const RunConfig& config, const Logger& log = {});
std::string cmd_eval(const RunConfig& config, const Logger& log = {});
std::string cmd_traverse(const RunConfig& config, const Logger& log = {});
std::string cmd_attend(const RunConfig& config, const Logger& log = {});
std::string cmd_project(const RunConfig& config, const Logger& log = {});
std::string cmd_sweep(const RunConfig& config, const Logger& log = {});

// Dispatches by command name; unknown names throw ConfigError.
std::string run_command(const std::string& command, const RunConfig& config, const Logger& log = {});

// Loads the configured dataset, preprocessed to `shape`.
Dataset load_run_dataset(const RunConfig& config, nn::Extent3 shape);
// Configured mapping, or the dataset attributes (optionally narrowed by
// recursive feature elimination) on dimensions 0..K-1.
AttributeMapping resolve_mapping(const RunConfig& config, const Dataset& dataset);

}  // namespace attrivae
