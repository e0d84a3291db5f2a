#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "spin_guard/pipeline.hpp"

namespace spin_guard {

/**
 * Reads a JSON pipeline config. Unknown keys are rejected with their path,
 * absent optional fields take the defaults, and relative file paths resolve
 * against the config file's directory.
 */
PipelineConfig parse_config(const std::string& path);
PipelineConfig parse_config_json(const nlohmann::json& root, const std::string& base_dir = ".");

/// Canonical JSON of the effective config, used for hashing.
nlohmann::json config_to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

}  // namespace spin_guard
