#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "iteach/error.hpp"
#include "iteach/feedback.hpp"
#include "iteach/llmgen.hpp"
#include "iteach/trainer.hpp"

using namespace iteach;
namespace fs = std::filesystem;

namespace {

const char* kPlan = "1. move above the cube\n2. move down to the cube\n3. close the gripper\n4. lift the cube up";
const char* kAbove = R"({"target": {"kind": "object_offset", "object": "cube", "offset": [0, 0, 0.05]}, "gripper": "open"})";
const char* kAboveCheck =
    R"({"check": {"kind": "distance_below", "from": "gripper", "to": {"kind": "object_offset", "object": "cube", "offset": [0, 0, 0.05]}, "threshold": 0.01}})";
const char* kDown = R"({"target": {"kind": "object", "object": "cube"}, "gripper": "open"})";
const char* kDownCheck =
    R"({"check": {"kind": "distance_below", "from": "gripper", "to": {"kind": "object", "object": "cube"}, "threshold": 0.008}})";
const char* kClose = R"({"target": {"kind": "object", "object": "cube"}, "gripper": "close"})";
const char* kCloseCheck = R"({"check": {"kind": "attached", "object": "cube"}})";
const char* kLift = R"({"target": {"kind": "object_offset", "object": "cube", "offset": [0, 0, 0.1]}, "gripper": "hold"})";
const char* kLiftCheck = R"({"check": {"kind": "always_false"}})";

// Recorded pick_lift exchange: planner, then action and check per step.
std::vector<std::string> pick_lift_transcript() {
  return {kPlan, kAbove, kAboveCheck, kDown, kDownCheck, kClose, kCloseCheck, kLift, kLiftCheck};
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() /
           ("iteach-llm-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

LlmEndpointConfig offline_cfg(const fs::path& cache) {
  LlmEndpointConfig c;
  c.cache_dir = cache.string();
  return c;
}

}  // namespace

TEST_SUITE("llmgen") {
  TEST_CASE("numbered list parsing") {
    CHECK(parse_numbered_list("1. foo\n2. bar") == std::vector<std::string>{"foo", "bar"});
    CHECK(parse_numbered_list("Sure!\n1) foo\n  2.  bar  \nthanks") == std::vector<std::string>{"foo", "bar"});
    CHECK_THROWS_AS(parse_numbered_list("no list here"), ParseError);
    CHECK_THROWS_AS(parse_numbered_list("1. a\n3. b"), ParseError);
    CHECK_THROWS_AS(parse_numbered_list("1. "), ParseError);
  }

  TEST_CASE("builtin templates validate") {
    const PromptTemplates& t = PromptTemplates::builtin();
    CHECK_NOTHROW(t.validate());
    CHECK(t.planner.exemplars.size() >= 2);
    CHECK(t.action.exemplars.size() >= 2);
    CHECK(t.check.exemplars.size() >= 2);
    PromptTemplate bad = t.action;
    bad.exemplars[0].output = "not json";
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("replayed generation yields the recorded program") {
    TempDir dir;
    const TaskSpec& task = find_builtin_task("pick_lift");
    ReplayChatClient client(pick_lift_transcript());
    const GenerationRecord rec = generate_codepolicy(task, offline_cfg(dir.path), PromptTemplates::builtin(), client);
    CHECK(client.calls() == 9);
    REQUIRE(rec.program.has_value());
    CHECK(rec.program->steps.size() == 4);
    CHECK(rec.program->steps[0].description == "move above the cube");
    CHECK(rec.program->steps[0].target == TargetExpr(ObjectPosOffset{"cube", {0, 0, 0.05}}));
    CHECK(rec.transcript.size() == 9);
    CHECK_NOTHROW(validate_program(*rec.program, task));

    // The request carries the system prompt, exemplars and the task.
    const auto& first = client.requests().front();
    CHECK(first.front().role == "system");
    CHECK(first.back().content.find("pick up the cube") != std::string::npos);

    // Generated program is a working teacher.
    TrainerConfig cfg;
    cfg.eval_episodes = 20;
    CHECK(evaluate_teacher(*rec.program, Simulator(task), cfg, 1) > 0.9);

    // Cache hit: no calls, same program. Offline too.
    ReplayChatClient none({});
    const GenerationRecord again = generate_codepolicy(task, offline_cfg(dir.path), PromptTemplates::builtin(), none);
    CHECK(none.calls() == 0);
    CHECK(again.program == rec.program);
    LlmEndpointConfig off = offline_cfg(dir.path);
    off.offline = true;
    CHECK(generate_codepolicy(task, off, PromptTemplates::builtin(), none).program == rec.program);
    CHECK(fs::exists(dir.path / (rec.content_hash + ".json")));
  }

  TEST_CASE("record json round trip") {
    ReplayChatClient client(pick_lift_transcript());
    const GenerationRecord rec =
        generate_codepolicy(find_builtin_task("pick_lift"), LlmEndpointConfig{}, PromptTemplates::builtin(), client);
    const std::string text = record_to_json(rec);
    const GenerationRecord back = record_from_json(text);
    CHECK(back.program == rec.program);
    CHECK(back.transcript.size() == rec.transcript.size());
    CHECK(record_to_json(back) == text);
  }

  TEST_CASE("offline with a cold cache fails without fabricating") {
    TempDir dir;
    LlmEndpointConfig cfg = offline_cfg(dir.path);
    cfg.offline = true;
    ReplayChatClient client(pick_lift_transcript());
    try {
      generate_codepolicy(find_builtin_task("pick_lift"), cfg, PromptTemplates::builtin(), client);
      FAIL("expected a transport error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Transport);
    }
    CHECK(client.calls() == 0);
  }

  TEST_CASE("unknown object goes through the repair loop") {
    auto responses = pick_lift_transcript();
    const std::string ball = R"({"target": {"kind": "object", "object": "ball"}, "gripper": "open"})";
    responses.insert(responses.begin() + 3, ball);  // first answer for step 2
    ReplayChatClient client(responses);
    const GenerationRecord rec =
        generate_codepolicy(find_builtin_task("pick_lift"), LlmEndpointConfig{}, PromptTemplates::builtin(), client);
    REQUIRE(rec.program.has_value());
    CHECK(rec.program->steps[1].target == TargetExpr(ObjectPos{"cube"}));
    // The retry repeats the conversation plus the rejected answer and the error.
    const auto& retry = client.requests()[4];
    CHECK(retry[retry.size() - 2].content == ball);
    CHECK(retry.back().content.find("ball") != std::string::npos);
    CHECK(rec.transcript[3].error.find("ball") != std::string::npos);
  }

  TEST_CASE("non-positive threshold is rejected and retried") {
    auto responses = pick_lift_transcript();
    const std::string bad =
        R"({"check": {"kind": "distance_below", "from": "gripper", "to": {"kind": "object", "object": "cube"}, "threshold": 0}})";
    responses.insert(responses.begin() + 4, bad);
    ReplayChatClient client(responses);
    const GenerationRecord rec =
        generate_codepolicy(find_builtin_task("pick_lift"), LlmEndpointConfig{}, PromptTemplates::builtin(), client);
    REQUIRE(rec.program.has_value());
    CHECK(client.calls() == 10);
    CHECK(rec.transcript[4].error.find("threshold must be positive") != std::string::npos);
  }

  TEST_CASE("exhausted retries fail with the transcript") {
    TempDir dir;
    LlmEndpointConfig cfg = offline_cfg(dir.path);
    cfg.max_retries = 2;
    ReplayChatClient client({"I cannot help with that", "still no list", "nope"});
    try {
      generate_codepolicy(find_builtin_task("pick_lift"), cfg, PromptTemplates::builtin(), client);
      FAIL("expected a generation failure");
    } catch (const GenerationError& e) {
      CHECK(e.code() == ErrorCode::GenerationFailed);
      CHECK(e.record().transcript.size() == 3);
      CHECK_FALSE(e.record().program.has_value());
    }
    CHECK(client.calls() == 3);
    bool failed_file = false;
    for (const auto& f : fs::directory_iterator(dir.path))
      failed_file |= f.path().string().ends_with(".failed.json");
    CHECK(failed_file);
  }

  TEST_CASE("transport failure mid-chain keeps the partial transcript") {
    ReplayChatClient client({kPlan, kAbove});
    try {
      generate_codepolicy(find_builtin_task("pick_lift"), LlmEndpointConfig{}, PromptTemplates::builtin(), client);
      FAIL("expected an error");
    } catch (const GenerationError& e) {
      CHECK(e.code() == ErrorCode::Transport);
      CHECK(e.record().transcript.size() >= 2);
    }
  }

  TEST_CASE("a task without objects does not crash") {
    TaskSpec empty;
    empty.name = "idle";
    empty.instruction = "do nothing";
    ReplayChatClient client({"1. stay where you are",
                             R"({"target": {"kind": "gripper_hold"}, "gripper": "hold"})",
                             R"({"check": {"kind": "always_false"}})"});
    GenerationRecord rec;
    CHECK_NOTHROW(rec = generate_codepolicy(empty, LlmEndpointConfig{}, PromptTemplates::builtin(), client));
    CHECK(rec.program.has_value());
    ReplayChatClient junk({"1. grab the cube", kClose, kClose, kClose, kClose});
    CHECK_THROWS_AS(generate_codepolicy(empty, LlmEndpointConfig{}, PromptTemplates::builtin(), junk), GenerationError);
  }

  TEST_CASE("cache key depends on task, templates and model") {
    const PromptTemplates& t = PromptTemplates::builtin();
    LlmEndpointConfig a, b;
    b.model = "other";
    const auto& pick = find_builtin_task("pick_lift");
    CHECK(generation_cache_key(pick, a, t) == generation_cache_key(pick, a, t));
    CHECK(generation_cache_key(pick, a, t) != generation_cache_key(pick, b, t));
    CHECK(generation_cache_key(pick, a, t) != generation_cache_key(find_builtin_task("reach_target"), a, t));
    PromptTemplates t2 = t;
    t2.check.version = "check-v2";
    CHECK(generation_cache_key(pick, a, t) != generation_cache_key(pick, a, t2));
    a.temperature = 0.7;  // not part of the key
    CHECK(generation_cache_key(pick, a, t) == generation_cache_key(pick, LlmEndpointConfig{}, t));
  }

  TEST_CASE("http client speaks the chat-completion wire format") {
    httplib::Server server;
    nlohmann::json seen;
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      seen = nlohmann::json::parse(req.body);
      auth = req.get_header_value("Authorization");
      nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "1. hello"}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server.Post("/broken/chat/completions",
                [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("ITEACH_TEST_TOKEN", "s3cret", 1);
    LlmEndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.model = "test-model";
    cfg.auth_env = "ITEACH_TEST_TOKEN";
    cfg.timeout_seconds = 5;
    HttpChatClient client;
    const std::string out = client.complete({{"system", "sys"}, {"user", "hi"}}, cfg);
    CHECK(out == "1. hello");
    CHECK(seen["model"] == "test-model");
    CHECK(seen["temperature"] == 0.0);
    CHECK(seen["messages"].size() == 2);
    CHECK(seen["messages"][1]["content"] == "hi");
    CHECK(auth == "Bearer s3cret");

    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/broken";
    try {
      client.complete({{"user", "hi"}}, cfg);
      FAIL("expected a transport error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Transport);
    }
    server.stop();
    th.join();

    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    CHECK_THROWS_AS(client.complete({{"user", "hi"}}, cfg), Error);
    ::unsetenv("ITEACH_TEST_TOKEN");
  }
}

// Opt-in: needs a reachable endpoint. ITEACH_LLM_BASE_URL and ITEACH_LLM_MODEL
// override the defaults.
TEST_SUITE("llmgen_live") {
  TEST_CASE("live endpoint generates a valid reach policy") {
    const char* on = std::getenv("ITEACH_LIVE_LLM_TESTS");
    if (!on || std::string(on) != "1") {
      MESSAGE("skipped: set ITEACH_LIVE_LLM_TESTS=1");
      return;
    }
    LlmEndpointConfig cfg;
    if (const char* u = std::getenv("ITEACH_LLM_BASE_URL")) cfg.base_url = u;
    if (const char* m = std::getenv("ITEACH_LLM_MODEL")) cfg.model = m;
    HttpChatClient client;
    const TaskSpec& task = find_builtin_task("reach_target");
    const GenerationRecord rec = generate_codepolicy(task, cfg, PromptTemplates::builtin(), client);
    REQUIRE(rec.program.has_value());
    CHECK_NOTHROW(validate_program(*rec.program, task));
  }
}
