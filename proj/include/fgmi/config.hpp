#pragma once

#include <istream>
#include <string>
#include <vector>

#include "fgmi/scenario.hpp"

namespace fgmi {

/// Reads an INI scenario file. Every non-empty section except [defaults] is one
/// scenario named after the section; keys in [defaults] apply to all of them
/// and are overridden per section. Unknown keys raise ConfigError listing
/// every offender.
std::vector<ScenarioConfig> parse_scenario_config(std::istream& in);
std::vector<ScenarioConfig> load_scenario_config(const std::string& path);

/// Keys accepted in a scenario section.
const std::vector<std::string>& scenario_config_keys();

}  // namespace fgmi
