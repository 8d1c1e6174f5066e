#include "dsl_json.hpp"

#include <cmath>
#include <initializer_list>
#include <string_view>

#include "iteach/error.hpp"

namespace iteach::dsl {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

Json vec(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

void require_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
}

void reject_unknown(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(join(path, key), "unknown field '" + key + "'");
  }
}

const Json& field(const Json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ParseError(join(path, key), std::string("missing field '") + key + "'");
  return j[key];
}

std::string string_field(const Json& j, const std::string& path, const char* key) {
  const Json& v = field(j, path, key);
  if (!v.is_string() || v.get<std::string>().empty())
    throw ParseError(join(path, key), "expected a non-empty string");
  return v.get<std::string>();
}

double number_field(const Json& j, const std::string& path, const char* key) {
  const Json& v = field(j, path, key);
  if (!v.is_number()) throw ParseError(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(join(path, key), "expected a finite number");
  return d;
}

Vec3 vec_field(const Json& j, const std::string& path, const char* key) {
  const Json& v = field(j, path, key);
  const std::string p = join(path, key);
  if (!v.is_array() || v.size() != 3) throw ParseError(p, "expected [x, y, z]");
  Vec3 out;
  double* c[3] = {&out.x, &out.y, &out.z};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ParseError(p, "expected a number");
    *c[i] = v[i].get<double>();
  }
  if (!out.finite()) throw ParseError(p, "non-finite component");
  return out;
}

std::string kind_of(const Json& j, const std::string& path) { return string_field(j, path, "kind"); }

Json atom_to_json(const CheckAtom& atom) {
  return std::visit(Overloaded{
                        [](const DistanceBelow& c) {
                          Json j;
                          j["kind"] = "distance_below";
                          if (c.from_object)
                            j["from"] = Json{{"object", *c.from_object}};
                          else
                            j["from"] = "gripper";
                          j["to"] = target_to_json(c.to);
                          j["threshold"] = c.threshold;
                          return j;
                        },
                        [](const GripperIs& c) { return Json{{"kind", "gripper_is"}, {"closed", c.closed}}; },
                        [](const Attached& c) { return Json{{"kind", "attached"}, {"object", c.object}}; },
                        [](const JointAbove& c) {
                          return Json{{"kind", "joint_above"}, {"object", c.object}, {"value", c.value}};
                        },
                        [](const JointBelow& c) {
                          return Json{{"kind", "joint_below"}, {"object", c.object}, {"value", c.value}};
                        },
                        [](const AlwaysFalse&) { return Json{{"kind", "always_false"}}; },
                    },
                    atom);
}

CheckAtom atom_from_json(const Json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = kind_of(j, path);
  if (kind == "distance_below") {
    reject_unknown(j, path, {"kind", "from", "to", "threshold"});
    DistanceBelow c;
    const Json& from = field(j, path, "from");
    if (from.is_string() && from.get<std::string>() == "gripper") {
      c.from_object.reset();
    } else if (from.is_object()) {
      reject_unknown(from, path + ".from", {"object"});
      c.from_object = string_field(from, path + ".from", "object");
    } else {
      throw ParseError(path + ".from", "expected \"gripper\" or {\"object\": name}");
    }
    c.to = target_from_json(field(j, path, "to"), path + ".to");
    c.threshold = number_field(j, path, "threshold");
    if (!(c.threshold > 0.0)) throw ParseError(path + ".threshold", "threshold must be positive");
    return c;
  }
  if (kind == "gripper_is") {
    reject_unknown(j, path, {"kind", "closed"});
    const Json& v = field(j, path, "closed");
    if (!v.is_boolean()) throw ParseError(path + ".closed", "expected a boolean");
    return GripperIs{v.get<bool>()};
  }
  if (kind == "attached") {
    reject_unknown(j, path, {"kind", "object"});
    return Attached{string_field(j, path, "object")};
  }
  if (kind == "joint_above" || kind == "joint_below") {
    reject_unknown(j, path, {"kind", "object", "value"});
    const std::string obj = string_field(j, path, "object");
    const double v = number_field(j, path, "value");
    if (v < 0.0 || v > 1.0) throw ParseError(path + ".value", "joint value must lie in [0, 1]");
    if (kind == "joint_above") return JointAbove{obj, v};
    return JointBelow{obj, v};
  }
  if (kind == "always_false") {
    reject_unknown(j, path, {"kind"});
    return AlwaysFalse{};
  }
  if (kind == "and") throw ParseError(path, "'and' may only appear at the top level of a check");
  throw ParseError(path + ".kind", "unknown check kind '" + kind + "'");
}

}  // namespace

Json target_to_json(const TargetExpr& t) {
  return std::visit(Overloaded{
                        [](const ObjectPos& e) { return Json{{"kind", "object"}, {"object", e.object}}; },
                        [](const ObjectPosOffset& e) {
                          return Json{{"kind", "object_offset"}, {"object", e.object}, {"offset", vec(e.offset)}};
                        },
                        [](const AbsolutePos& e) { return Json{{"kind", "absolute"}, {"position", vec(e.position)}}; },
                        [](const GripperHold&) { return Json{{"kind", "gripper_hold"}}; },
                    },
                    t);
}

Json check_to_json(const CheckExpr& c) {
  if (c.all.size() == 1) return atom_to_json(c.all.front());
  Json all = Json::array();
  for (const auto& a : c.all) all.push_back(atom_to_json(a));
  return Json{{"kind", "and"}, {"all", std::move(all)}};
}

Json step_to_json(const PlanStep& s) {
  Json j;
  j["description"] = s.description;
  j["target"] = target_to_json(s.target);
  j["gripper"] = to_string(s.gripper);
  j["check"] = check_to_json(s.check);
  return j;
}

TargetExpr target_from_json(const Json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = kind_of(j, path);
  if (kind == "object") {
    reject_unknown(j, path, {"kind", "object"});
    return ObjectPos{string_field(j, path, "object")};
  }
  if (kind == "object_offset") {
    reject_unknown(j, path, {"kind", "object", "offset"});
    return ObjectPosOffset{string_field(j, path, "object"), vec_field(j, path, "offset")};
  }
  if (kind == "absolute") {
    reject_unknown(j, path, {"kind", "position"});
    return AbsolutePos{vec_field(j, path, "position")};
  }
  if (kind == "gripper_hold") {
    reject_unknown(j, path, {"kind"});
    return GripperHold{};
  }
  throw ParseError(path + ".kind", "unknown target kind '" + kind + "'");
}

CheckExpr check_from_json(const Json& j, const std::string& path) {
  require_object(j, path);
  if (kind_of(j, path) != "and") return CheckExpr(atom_from_json(j, path));
  reject_unknown(j, path, {"kind", "all"});
  const Json& all = field(j, path, "all");
  if (!all.is_array() || all.empty()) throw ParseError(path + ".all", "expected a non-empty array");
  std::vector<CheckAtom> atoms;
  for (std::size_t i = 0; i < all.size(); ++i)
    atoms.push_back(atom_from_json(all[i], path + ".all[" + std::to_string(i) + "]"));
  return CheckExpr::conjunction(std::move(atoms));
}

StepGripper gripper_from_json(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(path, "expected \"open\", \"close\" or \"hold\"");
  const std::string s = j.get<std::string>();
  if (s == "open") return StepGripper::Open;
  if (s == "close") return StepGripper::Close;
  if (s == "hold") return StepGripper::Hold;
  throw ParseError(path, "unknown gripper command '" + s + "'");
}

Json parse_json_text(const std::string& text, const std::string& path) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace iteach::dsl

namespace iteach {

CodePolicyProgram parse_program(const std::string& json_text) {
  using namespace dsl;
  const Json root = parse_json_text(json_text);
  if (!root.is_object()) throw ParseError("", "expected an object");
  reject_unknown(root, "", {"task", "steps"});
  CodePolicyProgram p;
  p.task = string_field(root, "", "task");
  const Json& steps = field(root, "", "steps");
  if (!steps.is_array() || steps.empty()) throw ParseError("steps", "expected a non-empty array");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string path = "steps[" + std::to_string(i) + "]";
    const Json& js = steps[i];
    require_object(js, path);
    reject_unknown(js, path, {"description", "target", "gripper", "check"});
    PlanStep s;
    s.description = string_field(js, path, "description");
    s.target = target_from_json(field(js, path, "target"), path + ".target");
    s.gripper = gripper_from_json(field(js, path, "gripper"), path + ".gripper");
    s.check = check_from_json(field(js, path, "check"), path + ".check");
    p.steps.push_back(std::move(s));
  }
  return p;
}

std::string serialize_program(const CodePolicyProgram& program) {
  using namespace dsl;
  Json steps = Json::array();
  for (const auto& s : program.steps) steps.push_back(step_to_json(s));
  Json root;
  root["task"] = program.task;
  root["steps"] = std::move(steps);
  return root.dump(2) + "\n";
}

}  // namespace iteach
