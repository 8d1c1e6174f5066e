#include "iteach/codepolicy.hpp"

#include <algorithm>
#include <type_traits>

#include "iteach/error.hpp"

namespace iteach {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool evaluate_atom(const CheckAtom& atom, const GroundingView& view) {
  return std::visit(
      Overloaded{
          [&](const DistanceBelow& c) {
            const Vec3 from = c.from_object ? view.object_pos(*c.from_object) : view.gripper_pos();
            return (from - resolve_target(c.to, view)).norm() < c.threshold;
          },
          [&](const GripperIs& c) { return view.gripper_closed() == c.closed; },
          [&](const Attached& c) {
            if (!view.has_object(c.object)) throw Error(ErrorCode::NotFound, "check: unknown object '" + c.object + "'");
            return view.attached_name() == c.object;
          },
          [&](const JointAbove& c) { return view.joint_value(c.object) > c.value; },
          [&](const JointBelow& c) { return view.joint_value(c.object) < c.value; },
          [&](const AlwaysFalse&) { return false; },
      },
      atom);
}

void collect_target_objects(const TargetExpr& t, std::vector<std::string>& out) {
  if (const auto* p = std::get_if<ObjectPos>(&t)) out.push_back(p->object);
  if (const auto* p = std::get_if<ObjectPosOffset>(&t)) out.push_back(p->object);
}

void collect_check_objects(const CheckExpr& c, std::vector<std::string>& out) {
  for (const auto& atom : c.all) {
    std::visit(Overloaded{
                   [&](const DistanceBelow& a) {
                     if (a.from_object) out.push_back(*a.from_object);
                     collect_target_objects(a.to, out);
                   },
                   [&](const Attached& a) { out.push_back(a.object); },
                   [&](const JointAbove& a) { out.push_back(a.object); },
                   [&](const JointBelow& a) { out.push_back(a.object); },
                   [](const auto&) {},
               },
               atom);
  }
}

}  // namespace

Vec3 resolve_target(const TargetExpr& target, const GroundingView& view) {
  return std::visit(Overloaded{
                        [&](const ObjectPos& t) { return view.object_pos(t.object); },
                        [&](const ObjectPosOffset& t) { return view.object_pos(t.object) + t.offset; },
                        [&](const AbsolutePos& t) { return t.position; },
                        [&](const GripperHold&) { return view.gripper_pos(); },
                    },
                    target);
}

bool evaluate_check(const CheckExpr& check, const GroundingView& view) {
  if (check.all.empty()) return false;
  return std::all_of(check.all.begin(), check.all.end(), [&](const CheckAtom& a) { return evaluate_atom(a, view); });
}

const char* to_string(StepGripper g) {
  switch (g) {
    case StepGripper::Open: return "open";
    case StepGripper::Close: return "close";
    case StepGripper::Hold: return "hold";
  }
  return "hold";
}

void validate_program(const CodePolicyProgram& program, const TaskSpec& task) {
  if (program.steps.empty()) throw Error(ErrorCode::InvalidArgument, "program for " + program.task + " has no steps");
  for (std::size_t i = 0; i < program.steps.size(); ++i) {
    std::vector<std::string> names;
    collect_target_objects(program.steps[i].target, names);
    collect_check_objects(program.steps[i].check, names);
    for (const auto& n : names)
      if (!task.find_object(n))
        throw Error(ErrorCode::NotFound,
                    "steps[" + std::to_string(i) + "]: object '" + n + "' does not exist in task " + task.name);
  }
}

PolicyOutput evaluate_policy(const CodePolicyProgram& program, const GroundingView& view, std::size_t counter,
                             double max_step) {
  if (program.steps.empty()) throw Error(ErrorCode::InvalidArgument, "evaluate_policy: empty program");
  const std::size_t last = program.steps.size() - 1;
  std::size_t c = std::min(counter, last);
  while (c < last && evaluate_check(program.steps[c].check, view)) ++c;

  const PlanStep& step = program.steps[c];
  Action action;
  action.translation = clip_norm(resolve_target(step.target, view) - view.gripper_pos(), max_step);
  switch (step.gripper) {
    case StepGripper::Open: action.gripper = GripperCommand::Open; break;
    case StepGripper::Close: action.gripper = GripperCommand::Close; break;
    case StepGripper::Hold:
      action.gripper = view.gripper_closed() ? GripperCommand::Close : GripperCommand::Open;
      break;
  }
  return {action, c};
}

namespace {

PlanStep step(std::string description, TargetExpr target, StepGripper gripper, CheckAtom check) {
  return {std::move(description), std::move(target), gripper, CheckExpr(std::move(check))};
}

DistanceBelow gripper_near(TargetExpr t, double threshold) { return {std::nullopt, std::move(t), threshold}; }

// approach above, descend, close: the common prefix of every grasp.
void append_grasp(std::vector<PlanStep>& steps, const std::string& obj) {
  const ObjectPosOffset above{obj, {0.0, 0.0, 0.05}};
  steps.push_back(step("move above the " + obj, above, StepGripper::Open, gripper_near(above, 0.01)));
  steps.push_back(step("move down to the " + obj, ObjectPos{obj}, StepGripper::Open, gripper_near(ObjectPos{obj}, 0.008)));
  steps.push_back(step("close the gripper on the " + obj, ObjectPos{obj}, StepGripper::Close, Attached{obj}));
}

void append_press(std::vector<PlanStep>& steps, const std::string& button) {
  const ObjectPosOffset above{button, {0.0, 0.0, 0.05}};
  steps.push_back(step("move above the " + button, above, StepGripper::Open, gripper_near(above, 0.01)));
  steps.push_back(step("press the " + button + " down", ObjectPosOffset{button, {0.0, 0.0, -0.05}}, StepGripper::Close,
                       JointAbove{button, 0.99}));
}

}  // namespace

CodePolicyProgram scripted_program(const TaskSpec& task) {
  CodePolicyProgram p;
  p.task = task.name;
  auto& s = p.steps;
  const auto name = [&](std::size_t i) { return task.objects.at(i).name; };
  switch (task.predicate) {
    case SuccessPredicate::ReachTarget:
      s.push_back(step("move the gripper to the " + name(0), ObjectPos{name(0)}, StepGripper::Hold, AlwaysFalse{}));
      break;
    case SuccessPredicate::PushButton:
      append_press(s, name(0));
      break;
    case SuccessPredicate::PickLift:
      append_grasp(s, name(0));
      s.push_back(step("lift the " + name(0) + " up", ObjectPosOffset{name(0), {0.0, 0.0, 0.1}}, StepGripper::Hold,
                       AlwaysFalse{}));
      break;
    case SuccessPredicate::CloseSlider: {
      const std::string h = name(0);
      const ObjectPosOffset high{h, {-0.05, 0.0, 0.06}};
      const ObjectPosOffset behind{h, {-0.04, 0.0, 0.0}};
      s.push_back(step("move above and behind the " + h + " handle", high, StepGripper::Open, gripper_near(high, 0.01)));
      s.push_back(step("lower behind the " + h + " handle", behind, StepGripper::Open, gripper_near(behind, 0.01)));
      s.push_back(step("push the " + h + " handle closed", ObjectPosOffset{h, {0.05, 0.0, 0.0}}, StepGripper::Hold,
                       JointAbove{h, 0.97}));
      break;
    }
    case SuccessPredicate::StackTwo: {
      append_grasp(s, name(0));
      const ObjectPosOffset carry{name(1), {0.0, 0.0, 0.1}};
      const ObjectPosOffset place{name(1), {0.0, 0.0, 0.045}};
      s.push_back(step("carry the " + name(0) + " above the " + name(1), carry, StepGripper::Hold, gripper_near(carry, 0.01)));
      s.push_back(step("lower the " + name(0) + " onto the " + name(1), place, StepGripper::Hold, gripper_near(place, 0.008)));
      s.push_back(step("open the gripper", place, StepGripper::Open, GripperIs{false}));
      break;
    }
    case SuccessPredicate::PickPlaceBin: {
      append_grasp(s, name(0));
      const ObjectPosOffset over{name(1), {0.0, 0.0, 0.1}};
      s.push_back(step("carry the " + name(0) + " above the " + name(1), over, StepGripper::Hold, gripper_near(over, 0.01)));
      s.push_back(step("open the gripper to drop the " + name(0), over, StepGripper::Open, GripperIs{false}));
      break;
    }
    case SuccessPredicate::OpenSlider: {
      const std::string h = name(0);
      const ObjectPosOffset above{h, {0.0, 0.0, 0.05}};
      s.push_back(step("move above the " + h + " handle", above, StepGripper::Open, gripper_near(above, 0.01)));
      s.push_back(step("move down to the " + h + " handle", ObjectPos{h}, StepGripper::Open, gripper_near(ObjectPos{h}, 0.008)));
      s.push_back(step("grasp the " + h + " handle", ObjectPos{h}, StepGripper::Close, GripperIs{true}));
      s.push_back(step("pull the " + h + " open", ObjectPosOffset{h, {-0.05, 0.0, 0.0}}, StepGripper::Hold,
                       JointBelow{h, 0.03}));
      break;
    }
    case SuccessPredicate::PressTwoButtons:
      append_press(s, name(0));
      append_press(s, name(1));
      break;
  }
  validate_program(p, task);
  return p;
}

}  // namespace iteach
