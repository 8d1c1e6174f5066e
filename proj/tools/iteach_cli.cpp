// iteach command-line front end. Talks to the library through the C API only.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "iteach/iteach.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitExperiment = 1;
constexpr int kExitConfig = 2;

// Thrown to unwind with a specific exit code.
struct Exit {
  int code;
  std::string message;
};

int exit_code_for(iteach_status s) {
  switch (s) {
    case ITEACH_OK: return kExitOk;
    case ITEACH_E_INVALID_ARGUMENT:
    case ITEACH_E_PARSE:
    case ITEACH_E_NOT_FOUND:
    case ITEACH_E_SCHEMA: return kExitConfig;
    default: return kExitExperiment;
  }
}

void check(iteach_status s) {
  if (s != ITEACH_OK)
    throw Exit{exit_code_for(s), std::string(iteach_status_name(s)) + " error: " + iteach_last_error()};
}

// Owns a string returned by the library.
struct CStr {
  char* p = nullptr;
  ~CStr() { iteach_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};
using Env = Handle<iteach_env, iteach_env_free>;
using Program = Handle<iteach_program, iteach_program_free>;
using Model = Handle<iteach_model, iteach_model_free>;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{kExitConfig, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Exit{kExitExperiment, "cannot write " + path.string()};
  }
  fs::rename(tmp, path);
}

// Flags shared by the commands; unset values leave the config file alone.
struct Common {
  std::string config_path;
  std::string out;
  std::optional<double> beta;
  std::optional<std::string> feedback_mode;
  std::optional<bool> warm_start;
  std::optional<std::size_t> eval_episodes;
  std::optional<std::size_t> max_steps;
  std::optional<std::string> train_mode;
  bool scripted = false;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::optional<std::string> cache_dir;
  std::optional<std::string> auth_env;
  bool offline = false;

  void add_trainer_flags(CLI::App* c) {
    c->add_option("--config", config_path, "Experiment config JSON (all keys optional)")->check(CLI::ExistingFile);
    c->add_option("--beta", beta, "Similarity threshold in degrees")->check(CLI::Range(0.0, 180.0));
    c->add_option("--feedback-mode", feedback_mode, "both | evaluative | corrective");
    c->add_flag("--warm-start,!--no-warm-start", warm_start, "Fit teacher demonstrations before interaction");
    c->add_option("--eval-episodes", eval_episodes, "Evaluation episodes");
    c->add_option("--max-steps", max_steps, "Episode step limit");
    c->add_option("--train-mode", train_mode, "interleaved | concurrent");
  }
  void add_llm_flags(CLI::App* c) {
    c->add_flag("--scripted", scripted, "Use the scripted code policy instead of generation");
    c->add_option("--endpoint", endpoint, "Chat-completion base URL");
    c->add_option("--model", model, "Endpoint model id");
    c->add_option("--cache-dir", cache_dir, "Generation cache directory");
    c->add_option("--auth-env", auth_env, "Environment variable holding the bearer token");
    c->add_flag("--offline", offline, "Never contact the endpoint; cache hits only");
  }

  Json load() const {
    Json j = Json::object();
    if (!config_path.empty()) {
      try {
        j = Json::parse(read_file(config_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw Exit{kExitConfig, config_path + ": " + e.what()};
      }
      if (!j.is_object()) throw Exit{kExitConfig, config_path + ": expected a JSON object"};
    }
    Json& t = j["trainer"];
    if (t.is_null()) t = Json::object();
    if (beta) t["feedback"]["beta_deg"] = *beta;
    if (feedback_mode) t["feedback"]["mode"] = *feedback_mode;
    if (warm_start) t["use_warm_start"] = *warm_start;
    if (eval_episodes) t["eval_episodes"] = *eval_episodes;
    if (max_steps) t["max_episode_steps"] = *max_steps;
    if (train_mode) t["mode"] = *train_mode;
    Json& l = j["llm"];
    if (l.is_null()) l = Json::object();
    if (endpoint) l["base_url"] = *endpoint;
    if (model) l["model"] = *model;
    if (cache_dir) l["cache_dir"] = *cache_dir;
    if (auth_env) l["auth_env"] = *auth_env;
    if (offline) l["offline"] = true;
    if (scripted) j["scripted"] = true;
    return j;
  }

  std::string trainer_json() const { return load()["trainer"].dump(); }
};

Json parse_reply(const CStr& s) { return Json::parse(s.str()); }

void open_env(const std::string& task, Env& env) { check(iteach_env_create(task.c_str(), &env.p)); }

// Scripted unless a policy file is given.
void open_program(const std::string& task, const std::string& policy_path, Program& prog) {
  if (policy_path.empty())
    check(iteach_program_scripted(task.c_str(), &prog.p));
  else
    check(iteach_program_parse(read_file(policy_path).c_str(), task.c_str(), &prog.p));
}

int cmd_generate_policy(const Common& o, const std::string& task) {
  Json cfg = o.load();
  // Generation is the point of this command: scripted only when asked for.
  cfg["scripted"] = cfg.contains("scripted") && cfg["scripted"] == true;
  const fs::path out(o.out);
  if (cfg["llm"].value("cache_dir", std::string()).empty()) cfg["llm"]["cache_dir"] = (out / "llm-cache").string();

  Program prog;
  CStr record;
  const iteach_status s = iteach_program_generate(task.c_str(), cfg.dump().c_str(), &prog.p, &record.p);
  if (s != ITEACH_OK) {
    const std::string msg = std::string(iteach_status_name(s)) + " error: " + iteach_last_error();
    if (record.p) {
      const fs::path transcript = out / (task + ".generation.failed.json");
      write_file(transcript, record.str());
      std::cerr << "transcript: " << transcript.string() << "\n";
    }
    throw Exit{exit_code_for(s), msg};
  }
  CStr text;
  check(iteach_program_to_json(prog.p, &text.p));
  const fs::path policy = out / (task + ".policy.json");
  const fs::path rec = out / (task + ".generation.json");
  write_file(policy, text.str());
  write_file(rec, record.str());
  const Json p = Json::parse(text.str());
  std::cout << task << ": " << p.at("steps").size() << " steps, validated against the task catalogue\n"
            << "policy: " << policy.string() << "\nrecord: " << rec.string() << "\n";
  return kExitOk;
}

int cmd_collect_demos(const Common& o, const std::string& task, const std::string& policy, std::size_t count,
                      std::uint64_t seed) {
  const std::string trainer = o.trainer_json();
  Env env;
  Program prog;
  open_env(task, env);
  open_program(task, policy, prog);
  CStr out;
  check(iteach_collect_demos(env.p, prog.p, trainer.c_str(), count, seed, &out.p));
  const fs::path file = fs::path(o.out) / (task + "__demos__s" + std::to_string(seed) + ".json");
  write_file(file, out.str());
  const Json j = parse_reply(out);
  std::cout << "collected " << j.at("demos").size() << " demonstrations in " << j.at("attempts").get<std::size_t>()
            << " attempts: " << file.string() << "\n";
  return kExitOk;
}

int cmd_train(const Common& o, const std::string& task, const std::string& method, const std::string& policy,
              std::size_t episodes, std::uint64_t seed) {
  const std::string trainer = o.trainer_json();
  Env env;
  Program prog;
  open_env(task, env);
  open_program(task, policy, prog);
  Model model;
  CStr metrics;
  check(iteach_train(env.p, prog.p, method.c_str(), trainer.c_str(), episodes, seed, &model.p, &metrics.p));
  CStr weights;
  check(iteach_model_to_json(model.p, &weights.p));
  const std::string stem = task + "__" + method + "__s" + std::to_string(seed);
  const fs::path out(o.out);
  write_file(out / (stem + ".model.json"), weights.str());
  Json m = parse_reply(metrics);
  Json summary{{"task", task}, {"method", method}, {"seed", seed}, {"trainer", Json::parse(trainer)}, {"metrics", m}};
  write_file(out / (stem + ".metrics.json"), summary.dump(1) + "\n");
  std::cout << stem << ": success " << m.at("final_success_rate").get<double>() << ", correction rate "
            << m.at("mean_correction_rate").get<double>() << "\nmodel: " << (out / (stem + ".model.json")).string()
            << "\n";
  return kExitOk;
}

int cmd_evaluate(const Common& o, const std::string& task, const std::string& model_path, bool teacher,
                 const std::string& policy, std::uint64_t seed) {
  const std::string trainer = o.trainer_json();
  Env env;
  open_env(task, env);
  double success = 0.0;
  if (teacher) {
    Program prog;
    open_program(task, policy, prog);
    check(iteach_evaluate_teacher(prog.p, env.p, trainer.c_str(), seed, &success));
  } else {
    if (model_path.empty()) throw Exit{kExitConfig, "evaluate needs --model or --teacher"};
    Model model;
    check(iteach_model_parse(read_file(model_path).c_str(), &model.p));
    check(iteach_evaluate(model.p, env.p, trainer.c_str(), seed, &success));
  }
  std::cout << task << " " << (teacher ? "teacher" : "model") << " success " << success << "\n";
  return kExitOk;
}

void progress(const char* cell, int skipped, void*) { std::cerr << (skipped ? "skip " : "done ") << cell << "\n"; }

int run_experiment(const Json& cfg) {
  CStr result;
  check(iteach_experiment_run(cfg.dump().c_str(), progress, nullptr, &result.p));
  const Json r = parse_reply(result);
  std::cout << "executed " << r.at("executed").get<std::size_t>() << ", skipped " << r.at("skipped").get<std::size_t>()
            << ", rows " << r.at("records").get<std::size_t>() << "\nresults: " << r.at("csv").get<std::string>()
            << "\n";
  const auto& failures = r.at("failures");
  for (const auto& f : failures)
    std::cerr << "FAILED " << f.at("cell").get<std::string>() << ": " << f.at("message").get<std::string>() << "\n";
  return failures.empty() ? kExitOk : kExitExperiment;
}

template <class T>
void set_list(Json& cfg, const char* key, const std::vector<T>& v) {
  if (!v.empty()) cfg[key] = v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iteach: interactive imitation learning with a code-policy teacher"};
  app.require_subcommand(1);
  app.set_version_flag("--version", iteach_version());

  Common o;
  std::string task, method = "iteach", policy, model_path;
  std::vector<std::string> tasks, methods, csvs;
  std::vector<std::size_t> budgets;
  std::vector<std::uint64_t> seeds;
  std::vector<double> betas;
  std::size_t episodes = 0, count = 10;
  std::optional<std::size_t> workers;
  std::uint64_t seed = 1;
  bool teacher = false, llm = false, log_steps = false;

  auto* gen = app.add_subcommand("generate-policy", "Write a code policy (generated or scripted) and its record");
  gen->add_option("--task", task, "Task name")->required();
  gen->add_option("--out", o.out, "Output directory")->default_val("policies");
  o.add_llm_flags(gen);
  gen->add_option("--config", o.config_path, "Experiment config JSON")->check(CLI::ExistingFile);

  auto* demos = app.add_subcommand("collect-demos", "Record successful teacher demonstrations");
  demos->add_option("--task", task, "Task name")->required();
  demos->add_option("--count", count, "Number of successful demonstrations")->default_val(10);
  demos->add_option("--seed", seed, "Seed")->default_val(1);
  demos->add_option("--policy", policy, "Code policy JSON (default: scripted)")->check(CLI::ExistingFile);
  demos->add_option("--out", o.out, "Output directory")->default_val("demos");
  o.add_trainer_flags(demos);

  auto* train = app.add_subcommand("train", "Train one policy");
  train->add_option("method", method, "bc | iteach | warm-start-only")
      ->check(CLI::IsMember({"bc", "iteach", "warm-start-only"}))
      ->required();
  train->add_option("--task", task, "Task name")->required();
  train->add_option("--episodes", episodes, "Interactive episodes (iteach) or demonstrations (bc)");
  train->add_option("--seed", seed, "Seed")->default_val(1);
  train->add_option("--policy", policy, "Code policy JSON (default: scripted)")->check(CLI::ExistingFile);
  train->add_option("--out", o.out, "Output directory")->default_val("models");
  o.add_trainer_flags(train);

  auto* eval = app.add_subcommand("evaluate", "Success rate of a trained model or of the teacher");
  eval->add_option("--task", task, "Task name")->required();
  eval->add_option("--model", model_path, "Model JSON from train")->check(CLI::ExistingFile);
  eval->add_flag("--teacher", teacher, "Evaluate the code policy in direct control");
  eval->add_option("--policy", policy, "Code policy JSON (default: scripted)")->check(CLI::ExistingFile);
  eval->add_option("--seed", seed, "Seed")->default_val(1);
  o.add_trainer_flags(eval);

  auto* sweep = app.add_subcommand("sweep-beta", "Grid over the similarity threshold");
  auto* ablate = app.add_subcommand("ablate", "Grid over feedback type, warm start and episode budget");
  auto* run = app.add_subcommand("run", "Execute or resume an experiment grid");
  for (auto* c : {sweep, ablate, run}) {
    c->add_option("--tasks", tasks, "Task names")->delimiter(',');
    c->add_option("--episodes", budgets, "Episode budgets")->delimiter(',');
    c->add_option("--seeds", seeds, "Seeds")->delimiter(',');
    c->add_option("--out", o.out, "Output directory");
    c->add_option("--workers", workers, "Parallel grid cells");
    c->add_flag("--llm", llm, "Generate teacher programs through the endpoint instead of scripting them");
    c->add_flag("--log-steps", log_steps, "Write per-step JSONL logs for iteach runs");
    o.add_trainer_flags(c);
    o.add_llm_flags(c);
  }
  sweep->add_option("--betas", betas, "Thresholds in degrees")->delimiter(',')->default_str("0,10,20,45,90,180");
  run->add_option("--methods", methods, "bc, iteach, teacher-direct, warm-start-only")->delimiter(',');
  run->add_option("--betas", betas, "Thresholds in degrees (iteach only)")->delimiter(',');

  auto* report = app.add_subcommand("report", "Aggregate results CSVs into the table and plot-data files");
  report->add_option("--csv", csvs, "results.csv files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", o.out, "Output directory")->default_val("report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate_policy(o, task);
    if (demos->parsed()) return cmd_collect_demos(o, task, policy, count, seed);
    if (train->parsed()) return cmd_train(o, task, method, policy, episodes, seed);
    if (eval->parsed()) return cmd_evaluate(o, task, model_path, teacher, policy, seed);
    if (report->parsed()) {
      std::vector<const char*> paths;
      for (const auto& c : csvs) paths.push_back(c.c_str());
      CStr written;
      check(iteach_report(paths.data(), paths.size(), o.out.c_str(), &written.p));
      for (const auto& p : parse_reply(written)) std::cout << p.get<std::string>() << "\n";
      return kExitOk;
    }

    Json cfg = o.load();
    set_list(cfg, "tasks", tasks);
    set_list(cfg, "episodes", budgets);
    set_list(cfg, "seeds", seeds);
    if (!o.out.empty()) cfg["output_dir"] = o.out;
    if (workers) cfg["workers"] = *workers;
    if (llm) cfg["scripted"] = false;
    if (log_steps) cfg["log_steps"] = true;
    if (sweep->parsed()) {
      cfg["methods"] = {"iteach"};
      cfg["betas"] = betas.empty() ? std::vector<double>{0, 10, 20, 45, 90, 180} : betas;
      if (!cfg.contains("output_dir")) cfg["output_dir"] = "results/beta-sweep";
    } else if (ablate->parsed()) {
      cfg["methods"] = {"iteach"};
      cfg["feedback_modes"] = {"evaluative", "corrective", "both"};
      cfg["warm_start"] = {true, false};
      if (!cfg.contains("output_dir")) cfg["output_dir"] = "results/ablation";
    } else {
      set_list(cfg, "methods", methods);
      set_list(cfg, "betas", betas);
    }
    return run_experiment(cfg);
  } catch (const Exit& e) {
    if (!e.message.empty()) std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExperiment;
  }
}
