#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "stwind/harness.hpp"

namespace stwind {

/// Full JSON form of a config; every default is written out.
std::string config_to_json(const ExperimentConfig& cfg);

/// Missing keys keep their defaults; unknown keys throw ConfigError naming
/// the key (dotted path).
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace stwind
