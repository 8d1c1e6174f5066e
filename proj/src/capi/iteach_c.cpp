#include "iteach/iteach.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "codepolicy/dsl_json.hpp"
#include "iteach/experiment.hpp"

using iteach::dsl::Json;

struct iteach_env {
  iteach::Simulator sim;
  std::optional<iteach::EnvState> state;
};

struct iteach_program {
  iteach::CodePolicyProgram program;
};

struct iteach_model {
  iteach::PolicyModel model;
};

namespace {

thread_local std::string g_last_error;

iteach_status status_of(iteach::ErrorCode c) {
  switch (c) {
    case iteach::ErrorCode::InvalidArgument: return ITEACH_E_INVALID_ARGUMENT;
    case iteach::ErrorCode::Parse: return ITEACH_E_PARSE;
    case iteach::ErrorCode::NotFound: return ITEACH_E_NOT_FOUND;
    case iteach::ErrorCode::Transport: return ITEACH_E_TRANSPORT;
    case iteach::ErrorCode::GenerationFailed: return ITEACH_E_GENERATION_FAILED;
    case iteach::ErrorCode::Numeric: return ITEACH_E_NUMERIC;
    case iteach::ErrorCode::Io: return ITEACH_E_IO;
    case iteach::ErrorCode::Schema: return ITEACH_E_SCHEMA;
    case iteach::ErrorCode::Experiment: return ITEACH_E_EXPERIMENT;
    case iteach::ErrorCode::Internal: return ITEACH_E_INTERNAL;
  }
  return ITEACH_E_INTERNAL;
}

iteach_status fail(iteach_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs `fn`, mapping exceptions onto status codes.
template <class F>
iteach_status guard(F&& fn) {
  try {
    g_last_error.clear();
    fn();
    return ITEACH_OK;
  } catch (const iteach::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(ITEACH_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ITEACH_E_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) throw iteach::Error(iteach::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

std::string str_or_empty(const char* s) { return s ? s : ""; }

iteach::TrainerConfig trainer_of(const char* json) {
  const std::string text = str_or_empty(json);
  iteach::TrainerConfig cfg = text.empty() ? iteach::TrainerConfig{} : iteach::trainer_config_from_json(text);
  cfg.validate();
  return cfg;
}

Json vec(const iteach::Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Json state_json(const iteach::EnvState& s, const iteach::TaskSpec& task) {
  Json j;
  j["step"] = s.step_index;
  j["gripper"] = vec(s.gripper_pos);
  j["gripper_closed"] = s.gripper_closed;
  j["attached"] = s.attached_object ? Json(s.objects[*s.attached_object].name) : Json(nullptr);
  Json objs = Json::array();
  for (const auto& o : s.objects)
    objs.push_back({{"name", o.name}, {"kind", iteach::to_string(o.kind)}, {"pos", vec(o.pos)}, {"joint", o.joint_value}});
  j["objects"] = std::move(objs);
  j["success"] = iteach::is_success(s, task);
  return j;
}

Json action_json(const iteach::Action& a) {
  return {{"translation", vec(a.translation)}, {"gripper", a.gripper == iteach::GripperCommand::Close ? "close" : "open"}};
}

}  // namespace

extern "C" {

const char* iteach_version(void) { return "1.0.0"; }

const char* iteach_status_name(iteach_status s) {
  switch (s) {
    case ITEACH_OK: return "ok";
    case ITEACH_E_INVALID_ARGUMENT: return "invalid_argument";
    case ITEACH_E_PARSE: return "parse";
    case ITEACH_E_NOT_FOUND: return "not_found";
    case ITEACH_E_TRANSPORT: return "transport";
    case ITEACH_E_GENERATION_FAILED: return "generation_failed";
    case ITEACH_E_NUMERIC: return "numeric";
    case ITEACH_E_IO: return "io";
    case ITEACH_E_SCHEMA: return "schema";
    case ITEACH_E_EXPERIMENT: return "experiment";
    case ITEACH_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* iteach_last_error(void) { return g_last_error.c_str(); }

void iteach_string_free(char* s) { std::free(s); }

iteach_status iteach_tasks_json(char** out_json) {
  return guard([&] {
    need(out_json, "out_json");
    *out_json = dup(iteach::tasks_to_json(iteach::builtin_tasks()));
  });
}

iteach_status iteach_trainer_config_normalize(const char* json, char** out_json) {
  return guard([&] {
    need(out_json, "out_json");
    *out_json = dup(iteach::trainer_config_to_json(trainer_of(json)));
  });
}

iteach_status iteach_experiment_config_normalize(const char* json, char** out_json) {
  return guard([&] {
    need(out_json, "out_json");
    const std::string text = str_or_empty(json);
    const iteach::ExperimentConfig cfg = text.empty() ? iteach::ExperimentConfig{} : iteach::experiment_config_from_json(text);
    cfg.validate();
    *out_json = dup(iteach::experiment_config_to_json(cfg));
  });
}

iteach_status iteach_env_create(const char* task, iteach_env** out) {
  return guard([&] {
    need(task, "task");
    need(out, "out");
    *out = new iteach_env{iteach::Simulator(iteach::find_builtin_task(task)), std::nullopt};
  });
}

void iteach_env_free(iteach_env* env) { delete env; }

iteach_status iteach_env_reset(iteach_env* env, uint64_t seed, char** out_state_json) {
  return guard([&] {
    need(env, "env");
    iteach::Rng rng(seed);
    env->state = env->sim.reset(rng);
    if (out_state_json) *out_state_json = dup(state_json(*env->state, env->sim.task()).dump());
  });
}

iteach_status iteach_env_step(iteach_env* env, const double translation[3], int close, char** out_state_json,
                              int* out_success) {
  return guard([&] {
    need(env, "env");
    need(translation, "translation");
    if (!env->state) throw iteach::Error(iteach::ErrorCode::InvalidArgument, "env_step before env_reset");
    iteach::Action a;
    a.translation = {translation[0], translation[1], translation[2]};
    a.gripper = close ? iteach::GripperCommand::Close : iteach::GripperCommand::Open;
    iteach::EnvState next = env->sim.step(*env->state, a);
    const std::string text = out_state_json ? state_json(next, env->sim.task()).dump() : "";
    env->state = std::move(next);
    if (out_state_json) *out_state_json = dup(text);
    if (out_success) *out_success = env->sim.is_success(*env->state) ? 1 : 0;
  });
}

iteach_status iteach_program_scripted(const char* task, iteach_program** out) {
  return guard([&] {
    need(task, "task");
    need(out, "out");
    *out = new iteach_program{iteach::scripted_program(iteach::find_builtin_task(task))};
  });
}

iteach_status iteach_program_parse(const char* json, const char* task, iteach_program** out) {
  return guard([&] {
    need(json, "json");
    need(task, "task");
    need(out, "out");
    iteach::CodePolicyProgram p = iteach::parse_program(json);
    iteach::validate_program(p, iteach::find_builtin_task(task));
    *out = new iteach_program{std::move(p)};
  });
}

iteach_status iteach_program_to_json(const iteach_program* program, char** out_json) {
  return guard([&] {
    need(program, "program");
    need(out_json, "out_json");
    *out_json = dup(iteach::serialize_program(program->program));
  });
}

void iteach_program_free(iteach_program* program) { delete program; }

iteach_status iteach_program_generate(const char* task, const char* experiment_config_json, iteach_program** out,
                                      char** out_record_json) {
  try {
    need(task, "task");
    need(out, "out");
    const std::string text = str_or_empty(experiment_config_json);
    const iteach::ExperimentConfig cfg =
        text.empty() ? iteach::ExperimentConfig{} : iteach::experiment_config_from_json(text);
    const iteach::TaskSpec& spec = iteach::find_builtin_task(task);
    iteach::GenerationRecord rec;
    if (cfg.scripted) {
      rec.task = spec.name;
      rec.model = "scripted";
      rec.program = iteach::scripted_program(spec);
    } else {
      cfg.llm.validate();
      iteach::HttpChatClient client;
      rec = iteach::generate_codepolicy(spec, cfg.llm, iteach::PromptTemplates::builtin(), client);
    }
    std::string rec_text = out_record_json ? iteach::record_to_json(rec) : "";
    *out = new iteach_program{*rec.program};
    if (out_record_json) *out_record_json = dup(rec_text);
    g_last_error.clear();
    return ITEACH_OK;
  } catch (const iteach::GenerationError& e) {
    if (out_record_json) {
      try {
        *out_record_json = dup(iteach::record_to_json(e.record()));
      } catch (...) {
      }
    }
    return fail(status_of(e.code()), e.what());
  } catch (const iteach::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail(ITEACH_E_INTERNAL, e.what());
  }
}

iteach_status iteach_train(const iteach_env* env, const iteach_program* program, const char* method,
                           const char* trainer_json, size_t episodes, uint64_t seed, iteach_model** out_model,
                           char** out_metrics_json) {
  return guard([&] {
    need(env, "env");
    need(program, "program");
    need(method, "method");
    iteach::TrainerConfig cfg = trainer_of(trainer_json);
    const iteach::Method m = iteach::method_from_string(method);
    iteach::TrainResult r;
    switch (m) {
      case iteach::Method::ITeach:
        if (episodes) cfg.training_episodes = episodes;
        r = iteach::train_llm_iteach(env->sim, program->program, cfg, seed);
        break;
      case iteach::Method::BC:
        r = iteach::train_bc(env->sim, program->program, cfg, episodes ? episodes : cfg.training_episodes, seed);
        break;
      case iteach::Method::WarmStartOnly:
        r = iteach::train_warm_start_only(env->sim, program->program, cfg, seed);
        break;
      case iteach::Method::TeacherDirect:
        throw iteach::Error(iteach::ErrorCode::InvalidArgument, "teacher-direct trains nothing; use evaluate_teacher");
    }
    const std::string metrics = out_metrics_json ? iteach::run_metrics_json(r.metrics) : "";
    if (out_model) *out_model = new iteach_model{std::move(r.model)};
    if (out_metrics_json) *out_metrics_json = dup(metrics);
  });
}

iteach_status iteach_model_parse(const char* json, iteach_model** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new iteach_model{iteach::model_from_json(json)};
  });
}

iteach_status iteach_model_to_json(const iteach_model* model, char** out_json) {
  return guard([&] {
    need(model, "model");
    need(out_json, "out_json");
    *out_json = dup(iteach::model_to_json(model->model));
  });
}

void iteach_model_free(iteach_model* model) { delete model; }

iteach_status iteach_evaluate(const iteach_model* model, const iteach_env* env, const char* trainer_json,
                              uint64_t seed, double* out_success) {
  return guard([&] {
    need(model, "model");
    need(env, "env");
    need(out_success, "out_success");
    *out_success = iteach::evaluate(model->model, env->sim, trainer_of(trainer_json), seed);
  });
}

iteach_status iteach_evaluate_teacher(const iteach_program* program, const iteach_env* env, const char* trainer_json,
                                      uint64_t seed, double* out_success) {
  return guard([&] {
    need(program, "program");
    need(env, "env");
    need(out_success, "out_success");
    *out_success = iteach::evaluate_teacher(program->program, env->sim, trainer_of(trainer_json), seed);
  });
}

iteach_status iteach_collect_demos(const iteach_env* env, const iteach_program* program, const char* trainer_json,
                                   size_t count, uint64_t seed, char** out_json) {
  return guard([&] {
    need(env, "env");
    need(program, "program");
    need(out_json, "out_json");
    if (count == 0) throw iteach::Error(iteach::ErrorCode::InvalidArgument, "demonstration count must be positive");
    const iteach::TrainerConfig cfg = trainer_of(trainer_json);
    const std::size_t max_attempts = std::max<std::size_t>(cfg.warm_start_max_attempts, 10 * count);
    const iteach::Rng root = iteach::Rng(seed).fork("demos");
    Json demos = Json::array();
    std::size_t attempts = 0;
    while (demos.size() < count && attempts < max_attempts) {
      iteach::Rng rng = root.fork("demo-" + std::to_string(attempts++));
      const iteach::Demonstration d =
          iteach::collect_demonstration(env->sim, program->program, rng, cfg.max_episode_steps);
      if (!d.success) continue;
      Json steps = Json::array();
      for (const auto& s : d.trajectory.samples)
        steps.push_back({{"state", state_json(s.state, env->sim.task())}, {"action", action_json(s.action)}});
      demos.push_back({{"attempt", attempts - 1}, {"steps", std::move(steps)}});
    }
    if (demos.size() < count)
      throw iteach::Error(iteach::ErrorCode::Experiment, "only " + std::to_string(demos.size()) + " of " +
                                                             std::to_string(count) + " demonstrations succeeded in " +
                                                             std::to_string(max_attempts) + " attempts");
    Json j;
    j["format"] = "iteach-demos";
    j["task"] = env->sim.task().name;
    j["seed"] = seed;
    j["attempts"] = attempts;
    j["demos"] = std::move(demos);
    *out_json = dup(j.dump() + "\n");
  });
}

iteach_status iteach_beta_sweep(const iteach_env* env, const iteach_program* program, const char* trainer_json,
                                const double* betas, size_t n_betas, const uint64_t* seeds, size_t n_seeds,
                                char** out_rows_json) {
  return guard([&] {
    need(env, "env");
    need(program, "program");
    need(betas, "betas");
    need(seeds, "seeds");
    need(out_rows_json, "out_rows_json");
    const auto rows = iteach::run_beta_sweep(env->sim, program->program, trainer_of(trainer_json),
                                             {betas, betas + n_betas}, {seeds, seeds + n_seeds});
    Json j = Json::array();
    for (const auto& r : rows)
      j.push_back({{"beta", r.beta_deg}, {"seed", r.seed}, {"success_rate", r.success_rate},
                   {"correction_rate", r.correction_rate}});
    *out_rows_json = dup(j.dump());
  });
}

iteach_status iteach_ablation(const iteach_env* env, const iteach_program* program, const char* trainer_json,
                              const size_t* budgets, size_t n_budgets, const uint64_t* seeds, size_t n_seeds,
                              char** out_rows_json) {
  return guard([&] {
    need(env, "env");
    need(program, "program");
    need(budgets, "budgets");
    need(seeds, "seeds");
    need(out_rows_json, "out_rows_json");
    const auto rows = iteach::run_ablation(env->sim, program->program, trainer_of(trainer_json),
                                           {budgets, budgets + n_budgets}, {seeds, seeds + n_seeds});
    Json j = Json::array();
    for (const auto& r : rows)
      j.push_back({{"feedback_mode", iteach::to_string(r.mode)}, {"warm_start", r.warm_start},
                   {"episodes", r.episodes}, {"seed", r.seed}, {"success_rate", r.success_rate},
                   {"correction_rate", r.correction_rate}});
    *out_rows_json = dup(j.dump());
  });
}

iteach_status iteach_experiment_run(const char* experiment_config_json, iteach_progress_fn progress, void* user,
                                    char** out_result_json) {
  return guard([&] {
    need(experiment_config_json, "experiment_config_json");
    need(out_result_json, "out_result_json");
    const iteach::ExperimentConfig cfg = iteach::experiment_config_from_json(experiment_config_json);
    iteach::GridHooks hooks;
    if (progress)
      hooks.on_cell_done = [&](const iteach::RunCell& c, bool skipped) { progress(c.file_stem().c_str(), skipped, user); };
    const iteach::GridResult g = iteach::run_grid(cfg, hooks);
    Json j;
    j["csv"] = g.csv_path;
    j["executed"] = g.executed;
    j["skipped"] = g.skipped;
    j["records"] = g.records.size();
    Json f = Json::array();
    for (const auto& e : g.failures) f.push_back({{"cell", e.cell}, {"message", e.message}});
    j["failures"] = std::move(f);
    *out_result_json = dup(j.dump());
  });
}

iteach_status iteach_report(const char* const* csv_paths, size_t n_paths, const char* out_dir,
                            char** out_written_json) {
  return guard([&] {
    need(out_dir, "out_dir");
    need(out_written_json, "out_written_json");
    if (n_paths) need(csv_paths, "csv_paths");
    std::vector<std::string> paths;
    for (size_t i = 0; i < n_paths; ++i) {
      need(csv_paths[i], "csv path");
      paths.emplace_back(csv_paths[i]);
    }
    const iteach::ReportFiles r = iteach::write_report(paths, out_dir);
    *out_written_json = dup(Json(r.written).dump());
  });
}

}  // extern "C"
