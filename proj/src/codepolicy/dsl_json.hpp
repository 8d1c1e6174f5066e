#pragma once

// JSON (de)serialization of DSL fragments. Shared by the program parser and
// the per-prompt response parsers of the generator.

#include <string>

#include "json.hpp"

#include "iteach/codepolicy.hpp"

namespace iteach::dsl {

using Json = nlohmann::ordered_json;

Json target_to_json(const TargetExpr& t);
Json check_to_json(const CheckExpr& c);
Json step_to_json(const PlanStep& s);

TargetExpr target_from_json(const Json& j, const std::string& path);
CheckExpr check_from_json(const Json& j, const std::string& path);
StepGripper gripper_from_json(const Json& j, const std::string& path);

Json parse_json_text(const std::string& text, const std::string& path = "");

}  // namespace iteach::dsl
