#pragma once

#include <string>

#include <json.hpp>

#include "crxo/dgp.hpp"
#include "crxo/simulation.hpp"

namespace crxo {

// JSON trees; unknown keys are rejected so typos surface as ConfigError.
DgpSpec parse_dgp(const nlohmann::json& j);
nlohmann::json dgp_to_json(const DgpSpec& dgp);
DgpSpec load_dgp(const std::string& path);

// `dgp_file` paths are resolved relative to the scenario file (base_dir).
ScenarioConfig parse_scenario(const nlohmann::json& j, const std::string& base_dir = ".");
ScenarioConfig load_scenario(const std::string& path);

nlohmann::json read_json_file(const std::string& path);  // IoError / ConfigError

}  // namespace crxo
