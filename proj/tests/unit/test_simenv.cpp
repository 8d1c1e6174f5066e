#include <set>

#include "doctest.h"
#include "iteach/error.hpp"
#include "iteach/simenv.hpp"

using namespace iteach;

namespace {

Action move(Vec3 t, GripperCommand g = GripperCommand::Open) { return Action{t, g}; }

}  // namespace

TEST_SUITE("simenv") {
  TEST_CASE("reset is deterministic per seed and starts at home") {
    const Simulator sim(find_builtin_task("reach_target"));
    Rng a(1), b(1), c(2);
    const EnvState s1 = sim.reset(a), s2 = sim.reset(b), s3 = sim.reset(c);
    CHECK(s1 == s2);
    CHECK_FALSE(s1.objects[0].pos == s3.objects[0].pos);
    for (const auto& t : builtin_tasks()) {
      Rng r(9);
      const EnvState s = Simulator(t).reset(r);
      CHECK(s.gripper_pos == Vec3{0, 0, 0.3});
      CHECK_FALSE(s.gripper_closed);
      CHECK_FALSE(s.attached_object.has_value());
      CHECK(s.step_index == 0);
    }
  }

  TEST_CASE("pure translation and clipping") {
    const Simulator sim(find_builtin_task("reach_target"));
    Rng r(1);
    EnvState s = sim.reset(r);
    s.objects[0].pos = {0.25, 0.25, 0.05};
    s.gripper_pos = {0.1, 0, 0.2};
    EnvState n = sim.step(s, move({0.005, 0, 0}));
    CHECK(n.gripper_pos.x == doctest::Approx(0.105).epsilon(1e-12));
    CHECK(n.gripper_pos.y == 0.0);
    CHECK(n.gripper_pos.z == doctest::Approx(0.2));
    CHECK(n.step_index == 1);
    n = sim.step(s, move({0.05, 0, 0}));
    CHECK(n.gripper_pos.x == doctest::Approx(0.11).epsilon(1e-12));
  }

  TEST_CASE("workspace clamps the gripper") {
    const Simulator sim(find_builtin_task("reach_target"));
    Rng r(1);
    EnvState s = sim.reset(r);
    s.gripper_pos = {0.3, 0, 0.0};
    const EnvState n = sim.step(s, move({0.01, 0, -0.01}));
    CHECK(n.gripper_pos.x == 0.3);
    CHECK(n.gripper_pos.z == 0.0);
  }

  TEST_CASE("grasp attaches and carries the cube") {
    const Simulator sim(find_builtin_task("pick_lift"));
    Rng r(4);
    EnvState s = sim.reset(r);
    const Vec3 cube = s.objects[0].pos;
    s.gripper_pos = cube + Vec3{0.01, 0, 0};
    s = sim.step(s, move({0, 0, 0}, GripperCommand::Close));
    REQUIRE(s.attached_object.has_value());
    CHECK(*s.attached_object == 0u);
    CHECK(s.gripper_closed);
    s = sim.step(s, move({0, 0, 0.005}, GripperCommand::Close));
    CHECK(s.objects[0].pos.z == doctest::Approx(cube.z + 0.005).epsilon(1e-12));
    // Opening releases; the cube falls back to the table.
    s = sim.step(s, move({0, 0, 0}, GripperCommand::Open));
    CHECK_FALSE(s.attached_object.has_value());
    CHECK(s.objects[0].pos.z == doctest::Approx(kCubeHalfSize));
  }

  TEST_CASE("grasp out of reach does nothing") {
    const Simulator sim(find_builtin_task("pick_lift"));
    Rng r(4);
    EnvState s = sim.reset(r);
    s.gripper_pos = s.objects[0].pos + Vec3{0.03, 0, 0};
    s = sim.step(s, move({0, 0, 0}, GripperCommand::Close));
    CHECK_FALSE(s.attached_object.has_value());
  }

  TEST_CASE("button presses only when pushed down from above") {
    const Simulator sim(find_builtin_task("push_button"));
    Rng r(2);
    EnvState s = sim.reset(r);
    const Vec3 b = s.objects[0].pos;
    s.gripper_pos = b + Vec3{0, 0, 0.015};
    EnvState n = sim.step(s, move({0.0, 0, 0}));
    CHECK(n.objects[0].joint_value == 0.0);
    for (int i = 0; i < 10; ++i) n = sim.step(n, move({0, 0, -0.005}));
    CHECK(n.objects[0].joint_value == 1.0);
    CHECK(sim.is_success(n));
  }

  TEST_CASE("slider closes when pushed along its axis") {
    const TaskSpec& task = find_builtin_task("close_slider");
    const Simulator sim(task);
    Rng r(2);
    EnvState s = sim.reset(r);
    CHECK(s.objects[0].joint_value == 0.0);
    s.gripper_pos = s.objects[0].pos;
    for (int i = 0; i < 40 && !sim.is_success(s); ++i) {
      const Vec3 h = s.objects[0].pos;
      const Vec3 aim = h + task.objects[0].joint_axis * 0.01 - s.gripper_pos;
      s = sim.step(s, move(aim));
    }
    CHECK(s.objects[0].joint_value > 0.95);
    CHECK(sim.is_success(s));
  }

  TEST_CASE("success predicates") {
    {
      const Simulator sim(find_builtin_task("reach_target"));
      Rng r(1);
      EnvState s = sim.reset(r);
      s.gripper_pos = s.objects[0].pos + Vec3{0.005, 0, 0};
      CHECK(sim.is_success(s));
      s.gripper_pos = s.objects[0].pos + Vec3{0.02, 0, 0};
      CHECK_FALSE(sim.is_success(s));
    }
    {
      const Simulator sim(find_builtin_task("pick_lift"));
      Rng r(1);
      EnvState s = sim.reset(r);
      s.attached_object = 0;
      s.objects[0].pos.z = 0.10;
      CHECK_FALSE(sim.is_success(s));
      s.objects[0].pos.z = 0.20;
      CHECK(sim.is_success(s));
    }
    {
      const Simulator sim(find_builtin_task("press_two_buttons"));
      Rng r(1);
      EnvState s = sim.reset(r);
      s.objects[0].joint_value = 1.0;
      s.objects[1].joint_value = 0.0;
      CHECK_FALSE(sim.is_success(s));
      s.objects[1].joint_value = 1.0;
      CHECK(sim.is_success(s));
    }
  }

  TEST_CASE("catalogue") {
    const auto& tasks = builtin_tasks();
    CHECK(tasks.size() == 8);
    std::set<std::string> names;
    std::size_t core = 0;
    const Workspace ws;
    for (const auto& t : tasks) {
      names.insert(t.name);
      core += t.core ? 1 : 0;
      CHECK_NOTHROW(t.validate(ws));
      for (const auto& o : t.objects) {
        CHECK(ws.bounds.contains(o.spawn.min));
        CHECK(ws.bounds.contains(o.spawn.max));
      }
    }
    CHECK(names.size() == 8);
    CHECK(core == 4);
    CHECK_THROWS_AS(find_builtin_task("no_such_task"), Error);
  }

  TEST_CASE("task json round trip") {
    const auto back = tasks_from_json(tasks_to_json(builtin_tasks()));
    CHECK(back == builtin_tasks());
  }

  TEST_CASE("identical seed and actions give identical final state") {
    for (const auto& t : builtin_tasks()) {
      const Simulator sim(t);
      EnvState a, b;
      for (EnvState* s : {&a, &b}) {
        Rng r(21), act(5);
        *s = sim.reset(r);
        for (int i = 0; i < 200; ++i)
          *s = sim.step(*s, move({act.uniform(-0.02, 0.02), act.uniform(-0.02, 0.02), act.uniform(-0.02, 0.02)},
                                 act.uniform() < 0.5 ? GripperCommand::Open : GripperCommand::Close));
      }
      CHECK(a == b);
    }
  }

  TEST_CASE("non-finite actions are rejected") {
    const Simulator sim(find_builtin_task("reach_target"));
    Rng r(1);
    const EnvState s = sim.reset(r);
    CHECK_THROWS_AS(sim.step(s, move({std::nan(""), 0, 0})), Error);
  }
}
