#include "iteach/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

#include "iteach/error.hpp"

namespace iteach {

namespace {

using nlohmann::ordered_json;

double horizontal_distance(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.y - b.y); }

constexpr double kButtonTopZ = 0.03;
constexpr double kHandleZ = 0.08;
constexpr double kBinHalfWidth = 0.05;
constexpr double kBinHeight = 0.1;

// A free body dropped at `p` rests on the highest free body beneath it, or on
// the table.
double settle_height(const EnvState& s, std::size_t self, const Vec3& p) {
  double z = kCubeHalfSize;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (i == self) continue;
    const auto& o = s.objects[i];
    if (o.kind != ObjectKind::FreeBody) continue;
    if (horizontal_distance(o.pos, p) < 1.5 * kCubeHalfSize && o.pos.z < p.z)
      z = std::max(z, o.pos.z + 2.0 * kCubeHalfSize);
  }
  return z;
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const ordered_json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ParseError(path, "expected [x, y, z]");
  Vec3 v;
  double* out[3] = {&v.x, &v.y, &v.z};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ParseError(path, "expected a number");
    *out[i] = j[i].get<double>();
  }
  if (!v.finite()) throw ParseError(path, "non-finite component");
  return v;
}

}  // namespace

bool Box::contains(const Vec3& p, double tol) const {
  return p.x >= min.x - tol && p.x <= max.x + tol && p.y >= min.y - tol && p.y <= max.y + tol &&
         p.z >= min.z - tol && p.z <= max.z + tol;
}

Vec3 Box::clamp(const Vec3& p) const {
  return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y), std::clamp(p.z, min.z, max.z)};
}

void Workspace::validate() const {
  if (!(max_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "workspace: max_step must be positive");
  if (!(grasp_radius > 0.0) || !(interact_radius > 0.0))
    throw Error(ErrorCode::InvalidArgument, "workspace: radii must be positive");
  if (!(bounds.min.x < bounds.max.x && bounds.min.y < bounds.max.y && bounds.min.z < bounds.max.z))
    throw Error(ErrorCode::InvalidArgument, "workspace: degenerate bounds");
  if (!(joint_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "workspace: joint_rate must be positive");
}

const char* to_string(SuccessPredicate p) {
  switch (p) {
    case SuccessPredicate::ReachTarget: return "reach_target";
    case SuccessPredicate::PickLift: return "pick_lift";
    case SuccessPredicate::PushButton: return "push_button";
    case SuccessPredicate::CloseSlider: return "close_slider";
    case SuccessPredicate::StackTwo: return "stack_two";
    case SuccessPredicate::PickPlaceBin: return "pick_place_bin";
    case SuccessPredicate::OpenSlider: return "open_slider";
    case SuccessPredicate::PressTwoButtons: return "press_two_buttons";
  }
  return "reach_target";
}

SuccessPredicate success_predicate_from_string(const std::string& s) {
  for (auto p : {SuccessPredicate::ReachTarget, SuccessPredicate::PickLift, SuccessPredicate::PushButton,
                 SuccessPredicate::CloseSlider, SuccessPredicate::StackTwo, SuccessPredicate::PickPlaceBin,
                 SuccessPredicate::OpenSlider, SuccessPredicate::PressTwoButtons})
    if (s == to_string(p)) return p;
  throw Error(ErrorCode::NotFound, "unknown success predicate '" + s + "'");
}

namespace {

std::size_t required_objects(SuccessPredicate p) {
  switch (p) {
    case SuccessPredicate::StackTwo:
    case SuccessPredicate::PickPlaceBin:
    case SuccessPredicate::PressTwoButtons: return 2;
    default: return 1;
  }
}

}  // namespace

void TaskSpec::validate(const Workspace& ws) const {
  if (name.empty()) throw Error(ErrorCode::InvalidArgument, "task: empty name");
  if (instruction.empty()) throw Error(ErrorCode::InvalidArgument, "task " + name + ": empty instruction");
  if (objects.size() > kMaxObjects)
    throw Error(ErrorCode::InvalidArgument, "task " + name + ": more than 4 objects");
  if (objects.size() < required_objects(predicate))
    throw Error(ErrorCode::InvalidArgument, "task " + name + ": predicate needs more objects");
  std::set<std::string> names;
  for (const auto& o : objects) {
    if (o.name.empty() || !names.insert(o.name).second)
      throw Error(ErrorCode::InvalidArgument, "task " + name + ": object names must be unique and non-empty");
    if (!ws.bounds.contains(o.spawn.min) || !ws.bounds.contains(o.spawn.max))
      throw Error(ErrorCode::InvalidArgument, "task " + name + ": spawn region of " + o.name + " leaves the workspace");
    if (o.initial_joint < 0.0 || o.initial_joint > 1.0)
      throw Error(ErrorCode::InvalidArgument, "task " + name + ": initial joint value outside [0,1]");
    if (o.kind == ObjectKind::PrismaticJoint && (std::abs(o.joint_axis.norm() - 1.0) > 1e-9 || !(o.joint_travel > 0.0)))
      throw Error(ErrorCode::InvalidArgument, "task " + name + ": prismatic joint needs a unit axis and positive travel");
  }
}

std::optional<std::size_t> TaskSpec::find_object(const std::string& n) const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].name == n) return i;
  return std::nullopt;
}

Simulator::Simulator(TaskSpec task, Workspace ws) : task_(std::move(task)), ws_(ws) {
  ws_.validate();
  task_.validate(ws_);
}

EnvState Simulator::reset(Rng& rng) const {
  EnvState s;
  s.gripper_pos = ws_.home;
  s.gripper_closed = false;
  s.step_index = 0;
  s.objects.reserve(task_.objects.size());
  for (const auto& spec : task_.objects) {
    ObjectState o{spec.name, {}, spec.kind, spec.kind == ObjectKind::FreeBody ? 0.0 : spec.initial_joint};
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      o.pos = {rng.uniform(spec.spawn.min.x, spec.spawn.max.x), rng.uniform(spec.spawn.min.y, spec.spawn.max.y),
               rng.uniform(spec.spawn.min.z, spec.spawn.max.z)};
      placed = std::all_of(s.objects.begin(), s.objects.end(), [&](const ObjectState& other) {
        return horizontal_distance(other.pos, o.pos) >= task_.min_separation;
      });
    }
    if (!placed)
      throw Error(ErrorCode::InvalidArgument,
                  "task " + task_.name + ": could not place " + spec.name + " after 100 attempts (spawn region too tight)");
    s.objects.push_back(std::move(o));
  }
  return s;
}

EnvState Simulator::step(const EnvState& state, const Action& action) const {
  if (!action.finite()) throw Error(ErrorCode::InvalidArgument, "step: non-finite action");
  EnvState s = state;
  const Vec3 command = clip_norm(action.translation, ws_.max_step);
  s.gripper_pos = ws_.bounds.clamp(state.gripper_pos + command);

  if (s.attached_object) {
    auto& o = s.objects[*s.attached_object];
    o.pos = ws_.bounds.clamp(s.gripper_pos + s.attach_offset);
  }

  if (action.gripper == GripperCommand::Close) {
    s.gripper_closed = true;
    if (!s.attached_object) {
      std::optional<std::size_t> nearest;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < s.objects.size(); ++i) {
        if (s.objects[i].kind != ObjectKind::FreeBody) continue;
        const double d = (s.objects[i].pos - s.gripper_pos).norm();
        if (d < ws_.grasp_radius && d < best) {
          best = d;
          nearest = i;
        }
      }
      if (nearest) {
        s.attached_object = nearest;
        s.attach_offset = s.objects[*nearest].pos - s.gripper_pos;
      }
    }
  } else {
    s.gripper_closed = false;
    if (s.attached_object) {
      const std::size_t idx = *s.attached_object;
      s.attached_object.reset();
      s.attach_offset = {};
      auto& o = s.objects[idx];
      o.pos.z = settle_height(s, idx, o.pos);
    }
  }

  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    auto& o = s.objects[i];
    const auto& spec = task_.objects[i];
    if (o.kind == ObjectKind::Button) {
      const bool near = horizontal_distance(s.gripper_pos, o.pos) < ws_.interact_radius &&
                        s.gripper_pos.z <= o.pos.z + ws_.interact_radius + 1e-9;
      if (near && command.z < -1e-6) o.joint_value = std::min(1.0, o.joint_value + ws_.joint_rate);
    } else if (o.kind == ObjectKind::PrismaticJoint) {
      if ((s.gripper_pos - o.pos).norm() >= ws_.interact_radius) continue;
      const double along = command.dot(spec.joint_axis);
      double delta = 0.0;
      if (along > 0.0) {
        delta = std::min(along / spec.joint_travel, ws_.joint_rate);
      } else if (along < 0.0 && s.gripper_closed) {
        // Opening needs a grip on the handle.
        delta = std::max(along / spec.joint_travel, -ws_.joint_rate);
      }
      const double next = std::clamp(o.joint_value + delta, 0.0, 1.0);
      o.pos += spec.joint_axis * ((next - o.joint_value) * spec.joint_travel);
      o.joint_value = next;
    }
  }

  s.step_index = state.step_index + 1;
  return s;
}

bool is_success(const EnvState& s, const TaskSpec& task) {
  if (s.objects.size() < required_objects(task.predicate))
    throw Error(ErrorCode::InvalidArgument, "is_success: state does not match task " + task.name);
  const auto& o0 = s.objects[0];
  switch (task.predicate) {
    case SuccessPredicate::ReachTarget: return (s.gripper_pos - o0.pos).norm() < 0.01;
    case SuccessPredicate::PickLift: return s.attached_object == std::size_t{0} && o0.pos.z > 0.15;
    case SuccessPredicate::PushButton: return o0.joint_value >= 1.0;
    case SuccessPredicate::CloseSlider: return o0.joint_value > 0.95;
    case SuccessPredicate::OpenSlider: return o0.joint_value < 0.05;
    case SuccessPredicate::PressTwoButtons: return o0.joint_value >= 1.0 && s.objects[1].joint_value >= 1.0;
    case SuccessPredicate::StackTwo: {
      const auto& base = s.objects[1];
      const double rise = o0.pos.z - base.pos.z;
      return !s.attached_object && horizontal_distance(o0.pos, base.pos) < 0.015 &&
             rise > 1.5 * kCubeHalfSize && rise < 2.5 * kCubeHalfSize;
    }
    case SuccessPredicate::PickPlaceBin: {
      const auto& bin = s.objects[1];
      return !s.attached_object && std::abs(o0.pos.x - bin.pos.x) < kBinHalfWidth &&
             std::abs(o0.pos.y - bin.pos.y) < kBinHalfWidth && o0.pos.z < bin.pos.z + kBinHeight;
    }
  }
  throw Error(ErrorCode::NotFound, "unknown success predicate");
}

bool Simulator::is_success(const EnvState& state) const { return iteach::is_success(state, task_); }

const std::vector<TaskSpec>& builtin_tasks() {
  static const std::vector<TaskSpec> tasks = [] {
    const Box table{{-0.2, -0.2, kCubeHalfSize}, {0.2, 0.2, kCubeHalfSize}};
    const Box buttons{{-0.2, -0.2, kButtonTopZ}, {0.2, 0.2, kButtonTopZ}};
    std::vector<TaskSpec> t;
    t.push_back({"reach_target",
                 {{"target", ObjectKind::FreeBody, {{-0.2, -0.2, 0.05}, {0.2, 0.2, 0.15}}}},
                 "move the gripper to the target",
                 SuccessPredicate::ReachTarget, 0.0, true});
    t.push_back({"push_button",
                 {{"button", ObjectKind::Button, buttons}},
                 "press the button",
                 SuccessPredicate::PushButton, 0.0, true});
    t.push_back({"pick_lift",
                 {{"cube", ObjectKind::FreeBody, table}},
                 "pick up the cube and lift it",
                 SuccessPredicate::PickLift, 0.0, true});
    t.push_back({"close_slider",
                 {{"slider", ObjectKind::PrismaticJoint, {{-0.15, -0.2, kHandleZ}, {-0.05, 0.2, kHandleZ}}, 0.0,
                   {1.0, 0.0, 0.0}, 0.15}},
                 "push the slider handle to close the slider",
                 SuccessPredicate::CloseSlider, 0.0, true});
    t.push_back({"stack_two",
                 {{"cube_a", ObjectKind::FreeBody, table}, {"cube_b", ObjectKind::FreeBody, table}},
                 "stack cube_a on top of cube_b",
                 SuccessPredicate::StackTwo, 0.08, false});
    t.push_back({"pick_place_bin",
                 {{"cube", ObjectKind::FreeBody, table},
                  {"bin", ObjectKind::FreeBody, {{-0.2, -0.2, 0.01}, {0.2, 0.2, 0.01}}}},
                 "put the cube into the bin",
                 SuccessPredicate::PickPlaceBin, 0.12, false});
    t.push_back({"open_slider",
                 {{"slider", ObjectKind::PrismaticJoint, {{0.0, -0.2, kHandleZ}, {0.15, 0.2, kHandleZ}}, 1.0,
                   {1.0, 0.0, 0.0}, 0.15}},
                 "grasp the slider handle and pull the slider open",
                 SuccessPredicate::OpenSlider, 0.0, false});
    t.push_back({"press_two_buttons",
                 {{"button_a", ObjectKind::Button, buttons}, {"button_b", ObjectKind::Button, buttons}},
                 "press button_a and then button_b",
                 SuccessPredicate::PressTwoButtons, 0.1, false});
    return t;
  }();
  return tasks;
}

const TaskSpec& find_builtin_task(const std::string& name) {
  for (const auto& t : builtin_tasks())
    if (t.name == name) return t;
  throw Error(ErrorCode::NotFound, "unknown task '" + name + "'");
}

std::string tasks_to_json(const std::vector<TaskSpec>& tasks) {
  ordered_json arr = ordered_json::array();
  for (const auto& t : tasks) {
    ordered_json objs = ordered_json::array();
    for (const auto& o : t.objects) {
      ordered_json jo;
      jo["name"] = o.name;
      jo["kind"] = to_string(o.kind);
      jo["spawn"] = {{"min", vec_json(o.spawn.min)}, {"max", vec_json(o.spawn.max)}};
      if (o.kind != ObjectKind::FreeBody) jo["initial_joint"] = o.initial_joint;
      if (o.kind == ObjectKind::PrismaticJoint) {
        jo["axis"] = vec_json(o.joint_axis);
        jo["travel"] = o.joint_travel;
      }
      objs.push_back(std::move(jo));
    }
    ordered_json jt;
    jt["name"] = t.name;
    jt["instruction"] = t.instruction;
    jt["predicate"] = to_string(t.predicate);
    jt["core"] = t.core;
    jt["min_separation"] = t.min_separation;
    jt["objects"] = std::move(objs);
    arr.push_back(std::move(jt));
  }
  return arr.dump(2);
}

std::vector<TaskSpec> tasks_from_json(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", e.what());
  }
  if (!root.is_array()) throw ParseError("", "expected an array of tasks");
  std::vector<TaskSpec> out;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const auto& jt = root[i];
    const std::string p = "[" + std::to_string(i) + "]";
    if (!jt.is_object()) throw ParseError(p, "expected an object");
    auto str = [&](const ordered_json& j, const char* key, const std::string& path) {
      if (!j.contains(key) || !j[key].is_string()) throw ParseError(path + "." + key, "expected a string");
      return j[key].get<std::string>();
    };
    TaskSpec t;
    t.name = str(jt, "name", p);
    t.instruction = str(jt, "instruction", p);
    try {
      t.predicate = success_predicate_from_string(str(jt, "predicate", p));
    } catch (const Error& e) {
      throw ParseError(p + ".predicate", e.what());
    }
    t.core = jt.value("core", true);
    t.min_separation = jt.value("min_separation", 0.0);
    if (!jt.contains("objects") || !jt["objects"].is_array()) throw ParseError(p + ".objects", "expected an array");
    for (std::size_t k = 0; k < jt["objects"].size(); ++k) {
      const auto& jo = jt["objects"][k];
      const std::string po = p + ".objects[" + std::to_string(k) + "]";
      ObjectSpec o;
      o.name = str(jo, "name", po);
      try {
        o.kind = object_kind_from_string(str(jo, "kind", po));
      } catch (const Error& e) {
        throw ParseError(po + ".kind", e.what());
      }
      if (!jo.contains("spawn") || !jo["spawn"].is_object()) throw ParseError(po + ".spawn", "expected an object");
      o.spawn.min = vec_from_json(jo["spawn"].value("min", ordered_json()), po + ".spawn.min");
      o.spawn.max = vec_from_json(jo["spawn"].value("max", ordered_json()), po + ".spawn.max");
      o.initial_joint = jo.value("initial_joint", 0.0);
      if (jo.contains("axis")) o.joint_axis = vec_from_json(jo["axis"], po + ".axis");
      o.joint_travel = jo.value("travel", 0.15);
      t.objects.push_back(std::move(o));
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::optional<std::string> GroundingView::attached_name() const {
  if (!state_->attached_object) return std::nullopt;
  return state_->objects[*state_->attached_object].name;
}

const ObjectState& GroundingView::object(const std::string& name) const {
  const auto idx = state_->find_object(name);
  if (!idx) throw Error(ErrorCode::NotFound, "grounding: unknown object '" + name + "'");
  return state_->objects[*idx];
}

Vec3 GroundingView::object_pos(const std::string& name) const { return object(name).pos; }

double GroundingView::joint_value(const std::string& name) const { return object(name).joint_value; }

}  // namespace iteach
