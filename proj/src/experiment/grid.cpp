#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "codepolicy/dsl_json.hpp"
#include "iteach/experiment.hpp"
#include "util/atomic_file.hpp"
#include "util/text.hpp"

namespace iteach {

namespace fs = std::filesystem;
using dsl::Json;

namespace {

bool uses_feedback(Method m) { return m == Method::ITeach; }

std::size_t cell_episodes(Method m, std::size_t budget, const TrainerConfig& t) {
  switch (m) {
    case Method::TeacherDirect: return 0;
    case Method::WarmStartOnly: return t.warm_start_demos;
    default: return budget;
  }
}

Json vec4(const Action& a) { return Json::array({a.translation.x, a.translation.y, a.translation.z, a.gripper == GripperCommand::Close ? 1 : 0}); }

const char* feedback_tag(FeedbackKind k) {
  switch (k) {
    case FeedbackKind::Evaluative: return "E";
    case FeedbackKind::Corrective: return "C";
    case FeedbackKind::Withheld: return "W";
  }
  return "E";
}

std::string step_log_line(std::size_t episode, const StepRecord& s) {
  Json j;
  j["episode"] = episode;
  j["t"] = s.t;
  j["state"] = {{"gripper", Json::array({s.gripper_pos.x, s.gripper_pos.y, s.gripper_pos.z})},
                {"gripper_closed", s.gripper_closed},
                {"plan_step", s.plan_step}};
  j["a_agent"] = vec4(s.agent_action);
  j["feedback"] = feedback_tag(s.feedback);
  if (s.feedback == FeedbackKind::Corrective) j["teacher_action"] = vec4(s.teacher_action);
  j["executed"] = vec4(s.executed_action);
  j["q"] = s.q;
  return j.dump();
}

RunMetrics execute_cell(const RunCell& cell, const CodePolicyProgram& program, const fs::path& step_log) {
  const Simulator sim(find_builtin_task(cell.task));
  switch (cell.method) {
    case Method::ITeach: {
      TrainHooks hooks;
      std::ofstream log;
      if (!step_log.empty()) {
        log.open(step_log, std::ios::trunc);
        if (!log) throw Error(ErrorCode::Io, "cannot write " + step_log.string());
        hooks.on_episode = [&](std::size_t e, const EpisodeResult& ep) {
          for (const auto& s : ep.steps) log << step_log_line(e, s) << "\n";
        };
      }
      return train_llm_iteach(sim, program, cell.trainer, cell.seed, hooks).metrics;
    }
    case Method::BC: return train_bc(sim, program, cell.trainer, cell.episodes, cell.seed).metrics;
    case Method::WarmStartOnly: return train_warm_start_only(sim, program, cell.trainer, cell.seed).metrics;
    case Method::TeacherDirect: {
      RunMetrics m;
      m.seed = cell.seed;
      const auto t0 = std::chrono::steady_clock::now();
      m.final_success_rate = evaluate_teacher(program, sim, cell.trainer, cell.seed);
      m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return m;
    }
  }
  throw Error(ErrorCode::Internal, "unhandled method");
}

std::string csv_field_mode(const RunRecord& r) { return r.method == Method::ITeach ? to_string(r.feedback_mode) : "n/a"; }

}  // namespace

std::string RunCell::file_stem() const {
  return task + "__" + to_string(method) + "__e" + std::to_string(episodes) + "__" + config_hash.substr(0, 12) + "__s" +
         std::to_string(seed);
}

std::string cell_config_hash(const RunCell& cell, const std::string& program_hash) {
  Json j;
  j["task"] = Json::parse(tasks_to_json({find_builtin_task(cell.task)}));
  j["method"] = to_string(cell.method);
  j["episodes"] = cell.episodes;
  j["trainer"] = Json::parse(trainer_config_to_json(cell.trainer));
  j["program"] = program_hash;
  return sha256_hex(j.dump());
}

std::vector<RunCell> expand_grid(const ExperimentConfig& cfg) {
  const std::vector<double> betas = cfg.betas.empty() ? std::vector<double>{cfg.trainer.feedback.beta_deg} : cfg.betas;
  const std::vector<FeedbackMode> modes =
      cfg.feedback_modes.empty() ? std::vector<FeedbackMode>{cfg.trainer.feedback.mode} : cfg.feedback_modes;
  const std::vector<bool> warms = cfg.warm_start.empty() ? std::vector<bool>{cfg.trainer.use_warm_start} : cfg.warm_start;

  std::vector<RunCell> cells;
  std::set<std::tuple<std::string, int, std::size_t, double, int, bool, std::uint64_t>> seen;
  for (const auto& task : cfg.tasks)
    for (Method m : cfg.methods)
      for (std::size_t budget : cfg.episodes)
        for (double beta : betas)
          for (FeedbackMode mode : modes)
            for (bool warm : warms)
              for (std::uint64_t seed : cfg.seeds) {
                RunCell c;
                c.task = task;
                c.method = m;
                c.seed = seed;
                c.trainer = cfg.trainer;
                c.episodes = cell_episodes(m, budget, cfg.trainer);
                if (uses_feedback(m)) {
                  c.trainer.feedback.beta_deg = beta;
                  c.trainer.feedback.mode = mode;
                  c.trainer.use_warm_start = warm;
                  c.trainer.training_episodes = budget;
                }
                const auto key = std::make_tuple(task, static_cast<int>(m), c.episodes, c.trainer.feedback.beta_deg,
                                                 static_cast<int>(c.trainer.feedback.mode), c.trainer.use_warm_start, seed);
                if (!seen.insert(key).second) continue;
                cells.push_back(std::move(c));
              }
  return cells;
}

std::string run_metrics_json(const RunMetrics& m) {
  Json metrics;
  metrics["final_success_rate"] = m.final_success_rate;
  metrics["mean_correction_rate"] = m.mean_correction_rate();
  metrics["gradient_steps"] = m.gradient_steps;
  metrics["dataset_samples"] = m.dataset_samples;
  Json eps = Json::array();
  for (const auto& e : m.episodes)
    eps.push_back({{"success", e.success},
                   {"aborted", e.aborted},
                   {"length", e.length},
                   {"correction_rate", e.correction_rate},
                   {"mean_loss", e.mean_loss}});
  metrics["episodes"] = std::move(eps);
  return metrics.dump();
}

std::string run_summary_json(const RunCell& cell, const RunMetrics& m) {
  Json j;
  j["format"] = "iteach-run";
  j["config_hash"] = cell.config_hash;
  j["seed"] = cell.seed;
  j["task"] = cell.task;
  j["method"] = to_string(cell.method);
  j["episodes"] = cell.episodes;
  j["config"] = Json::parse(trainer_config_to_json(cell.trainer));
  j["metrics"] = Json::parse(run_metrics_json(m));
  return j.dump(1) + "\n";
}

RunRecord run_record_from_summary(const std::string& text) {
  const Json j = dsl::parse_json_text(text);
  if (!j.is_object() || j.value("format", "") != "iteach-run") throw Error(ErrorCode::Schema, "not a run summary");
  try {
    RunRecord r;
    r.task = j.at("task").get<std::string>();
    r.method = method_from_string(j.at("method").get<std::string>());
    r.episodes = j.at("episodes").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    const TrainerConfig t = trainer_config_from_json(j.at("config").dump());
    r.feedback_mode = t.feedback.mode;
    r.warm_start = t.use_warm_start;
    r.beta_deg = t.feedback.beta_deg;
    r.success_rate = j.at("metrics").at("final_success_rate").get<double>();
    r.correction_rate = j.at("metrics").at("mean_correction_rate").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("run summary: ") + e.what());
  }
}

CodePolicyProgram resolve_program(const TaskSpec& task, const ExperimentConfig& cfg) {
  if (cfg.scripted) return scripted_program(task);
  HttpChatClient client;
  GenerationRecord rec = generate_codepolicy(task, cfg.llm, PromptTemplates::builtin(), client);
  return *rec.program;
}

GridResult run_grid(const ExperimentConfig& cfg, const GridHooks& hooks) {
  cfg.validate();
  const fs::path out(cfg.output_dir);
  const fs::path runs = out / "runs";
  fs::create_directories(runs);
  write_file_atomic(out / "experiment.json", experiment_config_to_json(cfg));

  std::vector<RunCell> cells = expand_grid(cfg);
  GridResult result;

  std::map<std::string, CodePolicyProgram> programs;
  std::map<std::string, std::string> program_errors;
  for (const auto& t : cfg.tasks) {
    if (programs.count(t) || program_errors.count(t)) continue;
    try {
      programs.emplace(t, resolve_program(find_builtin_task(t), cfg));
    } catch (const Error& e) {
      program_errors.emplace(t, std::string("program for ") + t + ": " + e.what());
    }
  }
  for (auto& c : cells) {
    const auto p = programs.find(c.task);
    c.config_hash = cell_config_hash(c, p == programs.end() ? "" : sha256_hex(serialize_program(p->second)));
  }

  std::vector<std::optional<RunRecord>> records(cells.size());
  std::vector<std::string> errors(cells.size());
  std::vector<char> skipped(cells.size(), 0);
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  const auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const RunCell& c = cells[i];
      const fs::path summary = runs / (c.file_stem() + ".json");
      try {
        if (fs::exists(summary)) {
          RunRecord r = run_record_from_summary(read_text_file(summary));
          if (r.config_hash == c.config_hash && r.seed == c.seed) {
            records[i] = std::move(r);
            skipped[i] = 1;
            std::lock_guard lock(mu);
            if (hooks.on_cell_done) hooks.on_cell_done(c, true);
            continue;
          }
        }
        if (auto pe = program_errors.find(c.task); pe != program_errors.end()) throw Error(ErrorCode::Experiment, pe->second);
        const fs::path log = cfg.log_steps && c.method == Method::ITeach ? runs / (c.file_stem() + ".steps.jsonl") : fs::path();
        const RunMetrics m = execute_cell(c, programs.at(c.task), log);
        const std::string text = run_summary_json(c, m);
        write_file_atomic(summary, text);
        write_file_atomic(runs / (c.file_stem() + ".timing.json"),
                          "{\"config_hash\": \"" + c.config_hash + "\", \"seed\": " + std::to_string(c.seed) +
                              ", \"wall_clock_seconds\": " + format_double(m.wall_clock_seconds) + "}\n");
        records[i] = run_record_from_summary(text);
        std::error_code ec;
        fs::remove(runs / (c.file_stem() + ".error.txt"), ec);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        try {
          write_file_atomic(runs / (c.file_stem() + ".error.txt"), errors[i] + "\n");
        } catch (const std::exception&) {
        }
      }
      std::lock_guard lock(mu);
      if (hooks.on_cell_done) hooks.on_cell_done(c, false);
    }
  };
  const std::size_t n = std::min(cfg.workers, std::max<std::size_t>(1, cells.size()));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (records[i]) {
      result.records.push_back(*records[i]);
      (skipped[i] ? result.skipped : result.executed) += 1;
    } else {
      result.failures.push_back({cells[i].file_stem(), errors[i]});
    }
  }
  result.csv_path = (out / "results.csv").string();
  write_file_atomic(result.csv_path, results_csv(result.records));
  return result;
}

std::string results_csv(const std::vector<RunRecord>& rows) {
  std::ostringstream os;
  os << kResultsCsvHeader << "\n";
  for (const auto& r : rows) {
    const bool fb = r.method == Method::ITeach;
    os << r.task << "," << to_string(r.method) << "," << r.episodes << "," << csv_field_mode(r) << ","
       << (fb ? (r.warm_start ? "true" : "false") : "n/a") << "," << (fb ? format_double(r.beta_deg) : "n/a") << ","
       << r.seed << "," << format_double(r.success_rate) << "," << format_double(r.correction_rate) << ","
       << r.config_hash << "\n";
  }
  return os.str();
}

std::vector<RunRecord> parse_results_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Schema, source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : split(kResultsCsvHeader, ','))
    if (!col.count(name)) throw Error(ErrorCode::Schema, source + ": missing column '" + name + "'");

  std::vector<RunRecord> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size())
      throw Error(ErrorCode::Schema, source + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(header.size()) + " fields");
    const auto get = [&](const char* name) { return f[col.at(name)]; };
    try {
      RunRecord r;
      r.task = get("task");
      r.method = method_from_string(get("method"));
      r.episodes = std::stoul(get("episodes"));
      if (get("feedback_mode") != "n/a") r.feedback_mode = feedback_mode_from_string(get("feedback_mode"));
      if (get("warm_start") != "n/a") r.warm_start = get("warm_start") == "true";
      if (get("beta") != "n/a") r.beta_deg = std::stod(get("beta"));
      r.seed = std::stoull(get("seed"));
      r.success_rate = std::stod(get("success_rate"));
      r.correction_rate = std::stod(get("correction_rate"));
      r.config_hash = get("config_hash");
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::Schema, source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace iteach
