#pragma once

#include "vdc/sim.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vdc {

/// Malformed or missing configuration; the message names the offending key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Parses a scenario document with top-level keys chain, gains, trajectory,
/// initial and integration. Planar chains only.
ScenarioConfig parse_config(const std::string& text);

/// Reads and parses a file; throws ConfigError("config not found: ...")
/// when it cannot be opened.
ScenarioConfig load_config(const std::string& path);

/// Built-in scenarios by name ("twodof").
ScenarioConfig builtin_config(const std::string& name);

/// Canonical JSON for a planar scenario; parse_config(to_json(c)) == c.
std::string config_to_json(const ScenarioConfig& config);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace vdc
