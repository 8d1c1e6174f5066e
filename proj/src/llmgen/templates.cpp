#include "iteach/llmgen.hpp"

namespace iteach {

namespace {

const char* kPlannerSystem =
    "You control a robot arm with a parallel gripper above a table. Given the objects in the scene and an "
    "instruction, break the task down into short steps. Each step is one motion the gripper can finish on its "
    "own: moving to a point, opening or closing the gripper, pushing or pulling. Answer with a numbered list "
    "and nothing else.";

const char* kActionSystem =
    "You compute the action rule for one step of a robot plan. The gripper moves in a straight line toward a "
    "target point, at most 1 cm per tick. Answer with one JSON object {\"target\": T, \"gripper\": G}.\n"
    "T is one of:\n"
    "  {\"kind\": \"object\", \"object\": NAME}\n"
    "  {\"kind\": \"object_offset\", \"object\": NAME, \"offset\": [dx, dy, dz]}   (meters)\n"
    "  {\"kind\": \"absolute\", \"position\": [x, y, z]}\n"
    "  {\"kind\": \"gripper_hold\"}   (stay in place)\n"
    "G is \"open\", \"close\" or \"hold\" (keep the current state).\n"
    "Only use object names from the scene. z points up; the table is at z = 0.";

const char* kCheckSystem =
    "You write the completion test for one step of a robot plan. The step is finished as soon as the test "
    "is true; the robot then moves on to the next step. Answer with one JSON object {\"check\": C}.\n"
    "C is one of:\n"
    "  {\"kind\": \"distance_below\", \"from\": \"gripper\" | {\"object\": NAME}, \"to\": T, \"threshold\": meters}\n"
    "  {\"kind\": \"gripper_is\", \"closed\": true | false}\n"
    "  {\"kind\": \"attached\", \"object\": NAME}\n"
    "  {\"kind\": \"joint_above\", \"object\": NAME, \"value\": v}   (joint value in [0, 1])\n"
    "  {\"kind\": \"joint_below\", \"object\": NAME, \"value\": v}\n"
    "  {\"kind\": \"always_false\"}   (the step never ends; use for the final step)\n"
    "  {\"kind\": \"and\", \"all\": [C, ...]}   (atoms only, one level)\n"
    "T uses the same target forms as the action rule. Thresholds must be positive.";

const char* kDrawerScene =
    "Objects:\n- drawer_handle (prismatic_joint, joint value 1 = closed)\n"
    "Instruction: grasp the drawer handle and pull the drawer open";

const char* kDrawerPlan =
    "1. move above the drawer_handle\n2. move down to the drawer_handle\n3. grasp the drawer_handle\n"
    "4. pull the drawer_handle open";

const char* kBallScene =
    "Objects:\n- ball (free_body)\n- tray (free_body)\nInstruction: put the ball on the tray";

const char* kBallPlan =
    "1. move above the ball\n2. move down to the ball\n3. close the gripper on the ball\n"
    "4. carry the ball above the tray\n5. open the gripper to release the ball";

std::string step_input(const char* scene, const char* plan, const char* step) {
  return std::string(scene) + "\nPlan:\n" + plan + "\nCurrent step: " + step;
}

PromptTemplates make_builtin() {
  PromptTemplates t;
  t.planner.role = PromptRole::Planner;
  t.planner.version = "planner-v1";
  t.planner.system = kPlannerSystem;
  t.planner.exemplars = {{kDrawerScene, kDrawerPlan}, {kBallScene, kBallPlan}};
  t.planner.user_slot = "{input}\nSteps:";

  t.action.role = PromptRole::Action;
  t.action.version = "action-v1";
  t.action.system = kActionSystem;
  t.action.exemplars = {
      {step_input(kBallScene, kBallPlan, "move above the ball"),
       R"({"target": {"kind": "object_offset", "object": "ball", "offset": [0, 0, 0.05]}, "gripper": "open"})"},
      {step_input(kBallScene, kBallPlan, "close the gripper on the ball"),
       R"({"target": {"kind": "object", "object": "ball"}, "gripper": "close"})"},
      {step_input(kDrawerScene, kDrawerPlan, "pull the drawer_handle open"),
       R"({"target": {"kind": "object_offset", "object": "drawer_handle", "offset": [-0.05, 0, 0]}, "gripper": "hold"})"},
  };
  t.action.user_slot = "{input}\nAction:";

  t.check.role = PromptRole::Check;
  t.check.version = "check-v1";
  t.check.system = kCheckSystem;
  t.check.exemplars = {
      {step_input(kBallScene, kBallPlan, "move above the ball"),
       R"({"check": {"kind": "distance_below", "from": "gripper", "to": {"kind": "object_offset", "object": "ball", "offset": [0, 0, 0.05]}, "threshold": 0.01}})"},
      {step_input(kBallScene, kBallPlan, "close the gripper on the ball"),
       R"({"check": {"kind": "attached", "object": "ball"}})"},
      {step_input(kDrawerScene, kDrawerPlan, "pull the drawer_handle open"),
       R"({"check": {"kind": "joint_below", "object": "drawer_handle", "value": 0.03}})"},
  };
  t.check.user_slot = "{input}\nCheck:";
  return t;
}

}  // namespace

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates t = [] {
    PromptTemplates b = make_builtin();
    b.validate();
    return b;
  }();
  return t;
}

}  // namespace iteach
