#pragma once

#include <span>
#include <string>

namespace fracbsde::experiment {

struct Scenario {
    const char* name;
    const char* description;
    const char* config;  ///< JSON document
};

std::span<const Scenario> scenarios();
const Scenario* find_scenario(const std::string& name);

}  // namespace fracbsde::experiment
