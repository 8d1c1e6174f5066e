#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iteach/core.hpp"
#include "iteach/rng.hpp"

namespace iteach {

struct Box {
  Vec3 min;
  Vec3 max;

  bool contains(const Vec3& p, double tol = 0.0) const;
  Vec3 clamp(const Vec3& p) const;
  bool operator==(const Box&) const = default;
};

struct Workspace {
  Box bounds{{-0.3, -0.3, 0.0}, {0.3, 0.3, 0.5}};
  double max_step = 0.01;        // L_max, meters per step
  double grasp_radius = 0.02;
  double interact_radius = 0.02;
  double joint_rate = 0.2;       // max joint change per engaged step
  Vec3 home{0.0, 0.0, 0.3};

  void validate() const;
};

// Success predicates. Each refers to the task's objects by position in the
// object list (e.g. stack_two: objects[0] goes on top of objects[1]).
enum class SuccessPredicate {
  ReachTarget,
  PickLift,
  PushButton,
  CloseSlider,
  StackTwo,
  PickPlaceBin,
  OpenSlider,
  PressTwoButtons,
};

const char* to_string(SuccessPredicate p);
SuccessPredicate success_predicate_from_string(const std::string& s);

struct ObjectSpec {
  std::string name;
  ObjectKind kind = ObjectKind::FreeBody;
  Box spawn;
  double initial_joint = 0.0;
  // Prismatic joints only: unit direction in which the joint closes, and the
  // handle travel between joint values 0 and 1.
  Vec3 joint_axis{1.0, 0.0, 0.0};
  double joint_travel = 0.15;

  bool operator==(const ObjectSpec&) const = default;
};

struct TaskSpec {
  std::string name;
  std::vector<ObjectSpec> objects;
  std::string instruction;
  SuccessPredicate predicate = SuccessPredicate::ReachTarget;
  // Minimum horizontal distance between spawned objects.
  double min_separation = 0.0;
  // Part of the four-task core set (the others are long-horizon extras).
  bool core = true;

  bool operator==(const TaskSpec&) const = default;

  void validate(const Workspace& ws) const;
  std::optional<std::size_t> find_object(const std::string& name) const;
};

inline constexpr std::size_t kMaxObjects = 4;

// Free-body resting height (cube half extent) and stacking pitch.
inline constexpr double kCubeHalfSize = 0.02;

class Simulator {
 public:
  explicit Simulator(TaskSpec task, Workspace ws = {});

  const TaskSpec& task() const noexcept { return task_; }
  const Workspace& workspace() const noexcept { return ws_; }

  EnvState reset(Rng& rng) const;
  EnvState step(const EnvState& state, const Action& action) const;
  bool is_success(const EnvState& state) const;

 private:
  TaskSpec task_;
  Workspace ws_;
};

bool is_success(const EnvState& state, const TaskSpec& task);

// The eight built-in tasks: four core tasks followed by four long-horizon ones.
const std::vector<TaskSpec>& builtin_tasks();
const TaskSpec& find_builtin_task(const std::string& name);

std::string tasks_to_json(const std::vector<TaskSpec>& tasks);
std::vector<TaskSpec> tasks_from_json(const std::string& text);

// Read-only accessors the code policy is grounded on.
class GroundingView {
 public:
  GroundingView(const EnvState& state, std::size_t step_counter)
      : state_(&state), counter_(step_counter) {}

  Vec3 gripper_pos() const { return state_->gripper_pos; }
  bool gripper_closed() const { return state_->gripper_closed; }
  std::optional<std::string> attached_name() const;
  std::size_t step_counter() const { return counter_; }
  bool has_object(const std::string& name) const { return state_->find_object(name).has_value(); }
  // Throw NotFound for unknown names.
  Vec3 object_pos(const std::string& name) const;
  double joint_value(const std::string& name) const;

 private:
  const ObjectState& object(const std::string& name) const;

  const EnvState* state_;
  std::size_t counter_;
};

}  // namespace iteach
