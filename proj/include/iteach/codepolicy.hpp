#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "iteach/core.hpp"
#include "iteach/simenv.hpp"

namespace iteach {

// ---- Target expressions -------------------------------------------------

struct ObjectPos {
  std::string object;
  bool operator==(const ObjectPos&) const = default;
};

struct ObjectPosOffset {
  std::string object;
  Vec3 offset;
  bool operator==(const ObjectPosOffset&) const = default;
};

struct AbsolutePos {
  Vec3 position;
  bool operator==(const AbsolutePos&) const = default;
};

// Target is wherever the gripper currently is.
struct GripperHold {
  bool operator==(const GripperHold&) const = default;
};

using TargetExpr = std::variant<ObjectPos, ObjectPosOffset, AbsolutePos, GripperHold>;

Vec3 resolve_target(const TargetExpr& target, const GroundingView& view);

// ---- Check expressions --------------------------------------------------

struct DistanceBelow {
  // Empty means the gripper.
  std::optional<std::string> from_object;
  TargetExpr to;
  double threshold = 0.01;
  bool operator==(const DistanceBelow&) const = default;
};

struct GripperIs {
  bool closed = false;
  bool operator==(const GripperIs&) const = default;
};

struct Attached {
  std::string object;
  bool operator==(const Attached&) const = default;
};

struct JointAbove {
  std::string object;
  double value = 0.0;
  bool operator==(const JointAbove&) const = default;
};

struct JointBelow {
  std::string object;
  double value = 0.0;
  bool operator==(const JointBelow&) const = default;
};

struct AlwaysFalse {
  bool operator==(const AlwaysFalse&) const = default;
};

using CheckAtom = std::variant<DistanceBelow, GripperIs, Attached, JointAbove, JointBelow, AlwaysFalse>;

// Conjunction of atoms. A single atom is the common case; the JSON form of a
// one-atom check is the bare atom.
struct CheckExpr {
  std::vector<CheckAtom> all;

  CheckExpr() = default;
  CheckExpr(CheckAtom atom) : all{std::move(atom)} {}  // NOLINT(google-explicit-constructor)
  static CheckExpr conjunction(std::vector<CheckAtom> atoms) {
    CheckExpr c;
    c.all = std::move(atoms);
    return c;
  }

  bool operator==(const CheckExpr&) const = default;
};

bool evaluate_check(const CheckExpr& check, const GroundingView& view);

// ---- Programs -----------------------------------------------------------

enum class StepGripper { Open, Close, Hold };

const char* to_string(StepGripper g);

struct PlanStep {
  std::string description;
  TargetExpr target;
  StepGripper gripper = StepGripper::Hold;
  CheckExpr check;

  bool operator==(const PlanStep&) const = default;
};

struct CodePolicyProgram {
  std::string task;
  std::vector<PlanStep> steps;

  bool operator==(const CodePolicyProgram&) const = default;
};

// Throws Error(NotFound) when the program names an object the task lacks, or
// InvalidArgument for an empty plan.
void validate_program(const CodePolicyProgram& program, const TaskSpec& task);

struct PolicyOutput {
  Action action;
  std::size_t counter = 0;
};

// One control tick: advance the plan counter past every completed step (the
// active step's check is a completion predicate; the last step never
// advances), then move toward the active step's target. The translation is
// the raw displacement clipped to `max_step`.
PolicyOutput evaluate_policy(const CodePolicyProgram& program, const GroundingView& view, std::size_t counter,
                             double max_step);

// Hand-authored reference program for a built-in task.
CodePolicyProgram scripted_program(const TaskSpec& task);

// JSON grammar shared with the LLM generator. parse_* throw ParseError with a
// location path.
CodePolicyProgram parse_program(const std::string& json_text);
std::string serialize_program(const CodePolicyProgram& program);

}  // namespace iteach
