// Exercises the shared library through the C header only.
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "iteach/iteach.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Takes ownership of a returned string.
std::string take(char* s) {
  std::string out = s ? s : "";
  iteach_string_free(s);
  return out;
}

const char* kFast = R"({"eval_episodes": 5, "warm_start_demos": 3, "warm_start_epochs": 2, "training_episodes": 4})";

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("status names and last error") {
    CHECK(std::string(iteach_status_name(ITEACH_OK)) == "ok");
    CHECK(std::string(iteach_status_name(ITEACH_E_SCHEMA)) == "schema");
    CHECK(std::strlen(iteach_version()) > 0);

    iteach_env* env = nullptr;
    CHECK(iteach_env_create("no_such_task", &env) == ITEACH_E_NOT_FOUND);
    CHECK(env == nullptr);
    CHECK(std::string(iteach_last_error()).find("no_such_task") != std::string::npos);
    CHECK(iteach_env_create(nullptr, &env) == ITEACH_E_INVALID_ARGUMENT);

    char* out = nullptr;
    CHECK(iteach_trainer_config_normalize(R"({"bogus": 1})", &out) == ITEACH_E_PARSE);
    CHECK(out == nullptr);
    REQUIRE(iteach_trainer_config_normalize(nullptr, &out) == ITEACH_OK);
    const json t = json::parse(take(out));
    CHECK(t["feedback"]["beta_deg"] == 20.0);
    REQUIRE(iteach_tasks_json(&out) == ITEACH_OK);
    CHECK(json::parse(take(out)).size() >= 4);
  }

  TEST_CASE("environment reset and step") {
    iteach_env* env = nullptr;
    REQUIRE(iteach_env_create("reach_target", &env) == ITEACH_OK);
    char* s = nullptr;
    REQUIRE(iteach_env_reset(env, 3, &s) == ITEACH_OK);
    const json a = json::parse(take(s));
    CHECK(a["step"] == 0);
    CHECK(a["objects"][0]["name"] == "target");
    REQUIRE(iteach_env_reset(env, 3, &s) == ITEACH_OK);
    CHECK(json::parse(take(s)) == a);

    const double dx[3] = {0.005, 0.0, 0.0};
    int success = -1;
    REQUIRE(iteach_env_step(env, dx, 0, &s, &success) == ITEACH_OK);
    const json b = json::parse(take(s));
    CHECK(b["step"] == 1);
    CHECK(success == 0);
    const double moved = b["gripper"][0].get<double>() - a["gripper"][0].get<double>();
    CHECK(moved == doctest::Approx(0.005).epsilon(1e-9));

    const double bad[3] = {std::nan(""), 0, 0};
    CHECK(iteach_env_step(env, bad, 0, nullptr, nullptr) == ITEACH_E_INVALID_ARGUMENT);
    iteach_env_free(env);
  }

  TEST_CASE("program parse errors carry the path") {
    iteach_program* p = nullptr;
    CHECK(iteach_program_parse("{not json", "reach_target", &p) == ITEACH_E_PARSE);
    const char* bad = R"({"task": "reach_target", "steps": [{"description": "go", "target": {"kind": "object", "object": "ball"},
                          "gripper": "open", "check": {"kind": "always_false"}}]})";
    CHECK(iteach_program_parse(bad, "reach_target", &p) == ITEACH_E_NOT_FOUND);
    CHECK(std::string(iteach_last_error()).find("ball") != std::string::npos);
    CHECK(p == nullptr);

    REQUIRE(iteach_program_scripted("reach_target", &p) == ITEACH_OK);
    char* text = nullptr;
    REQUIRE(iteach_program_to_json(p, &text) == ITEACH_OK);
    const std::string js = take(text);
    iteach_program* q = nullptr;
    REQUIRE(iteach_program_parse(js.c_str(), "reach_target", &q) == ITEACH_OK);
    REQUIRE(iteach_program_to_json(q, &text) == ITEACH_OK);
    CHECK(take(text) == js);
    iteach_program_free(p);
    iteach_program_free(q);
  }

  TEST_CASE("train, round trip and evaluate") {
    iteach_env* env = nullptr;
    iteach_program* prog = nullptr;
    REQUIRE(iteach_env_create("reach_target", &env) == ITEACH_OK);
    REQUIRE(iteach_program_scripted("reach_target", &prog) == ITEACH_OK);

    iteach_model* m = nullptr;
    char* metrics = nullptr;
    REQUIRE(iteach_train(env, prog, "iteach", kFast, 4, 1, &m, &metrics) == ITEACH_OK);
    const json mj = json::parse(take(metrics));
    CHECK(mj["episodes"].size() == 4);
    CHECK(iteach_train(env, prog, "dagger", kFast, 4, 1, nullptr, nullptr) == ITEACH_E_INVALID_ARGUMENT);

    char* text = nullptr;
    REQUIRE(iteach_model_to_json(m, &text) == ITEACH_OK);
    const std::string mt = take(text);
    iteach_model* m2 = nullptr;
    REQUIRE(iteach_model_parse(mt.c_str(), &m2) == ITEACH_OK);
    double s1 = -1, s2 = -1;
    REQUIRE(iteach_evaluate(m, env, kFast, 1, &s1) == ITEACH_OK);
    REQUIRE(iteach_evaluate(m2, env, kFast, 1, &s2) == ITEACH_OK);
    CHECK(s1 == s2);
    CHECK(s1 == mj["final_success_rate"].get<double>());
    double teacher = -1;
    REQUIRE(iteach_evaluate_teacher(prog, env, kFast, 9, &teacher) == ITEACH_OK);
    CHECK(teacher == 1.0);

    char* demos = nullptr;
    REQUIRE(iteach_collect_demos(env, prog, kFast, 2, 5, &demos) == ITEACH_OK);
    const json dj = json::parse(take(demos));
    CHECK(dj["format"] == "iteach-demos");
    CHECK(dj["demos"].size() == 2);

    iteach_model_free(m);
    iteach_model_free(m2);
    iteach_program_free(prog);
    iteach_env_free(env);
  }

  TEST_CASE("experiment run and report") {
    const fs::path dir = fs::temp_directory_path() / ("iteach-capi-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    json cfg{{"tasks", {"reach_target"}},
             {"methods", {"teacher-direct"}},
             {"seeds", {1, 2}},
             {"trainer", json::parse(kFast)},
             {"output_dir", dir.string()}};
    int calls = 0;
    char* result = nullptr;
    auto progress = [](const char*, int, void* user) { ++*static_cast<int*>(user); };
    REQUIRE(iteach_experiment_run(cfg.dump().c_str(), progress, &calls, &result) == ITEACH_OK);
    const json r = json::parse(take(result));
    CHECK(calls == 2);
    CHECK(r["executed"] == 2);
    CHECK(r["failures"].empty());

    const std::string csv = r["csv"];
    const char* paths[] = {csv.c_str()};
    char* written = nullptr;
    REQUIRE(iteach_report(paths, 1, (dir / "report").c_str(), &written) == ITEACH_OK);
    CHECK(json::parse(take(written)).size() == 5);
    CHECK(iteach_report(paths, 0, (dir / "report").c_str(), &written) == ITEACH_E_INVALID_ARGUMENT);

    cfg["seeds"] = "x";
    CHECK(iteach_experiment_run(cfg.dump().c_str(), nullptr, nullptr, &result) == ITEACH_E_PARSE);
    fs::remove_all(dir);
  }
}
