// Plan files: a single JSON document mapping 1:1 onto ExperimentPlan.
// Unknown keys are rejected; errors carry the offending key path.
#pragma once

#include <string>

#include "perfhom/harness.hpp"

namespace perfhom {

ExperimentPlan parse_plan(const std::string& json_text);
ExperimentPlan load_plan(const std::string& path);
std::string plan_to_json(const ExperimentPlan& plan);

// write-temp-rename; never leaves a partial file at the final path.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace perfhom
