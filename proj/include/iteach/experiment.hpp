#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iteach/llmgen.hpp"
#include "iteach/trainer.hpp"

namespace iteach {

enum class Method { BC, ITeach, TeacherDirect, WarmStartOnly };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

// ---- Config documents -------------------------------------------------------

// Full defaulting: every key is optional. Unknown keys are rejected.
std::string trainer_config_to_json(const TrainerConfig& cfg);
TrainerConfig trainer_config_from_json(const std::string& text);

struct ExperimentConfig {
  std::vector<std::string> tasks{"reach_target"};
  std::vector<Method> methods{Method::ITeach};
  // Interactive episodes for iteach, demonstrations for bc. Ignored by
  // teacher-direct and warm-start-only.
  std::vector<std::size_t> episodes{400};
  std::vector<std::uint64_t> seeds{1};
  // Grid axes that only apply to iteach; empty means "the trainer value".
  std::vector<double> betas;
  std::vector<FeedbackMode> feedback_modes;
  std::vector<bool> warm_start;
  TrainerConfig trainer;
  bool scripted = true;
  LlmEndpointConfig llm;
  std::string output_dir = "results";
  std::size_t workers = 1;
  bool log_steps = false;  // per-step JSONL episode logs for iteach runs

  void validate() const;
};

std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& text);

// ---- Grid -------------------------------------------------------------------

struct RunCell {
  std::string task;
  Method method = Method::ITeach;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
  TrainerConfig trainer;  // effective: beta, mode, warm start applied
  std::string config_hash;

  // runs/<stem>.json
  std::string file_stem() const;
};

// Cartesian product, deduplicated (axes that do not affect a method collapse).
// Ordering is deterministic: task, method, episodes, beta, mode, warm start, seed.
// config_hash is left empty; run_grid fills it once the programs are known.
std::vector<RunCell> expand_grid(const ExperimentConfig& cfg);

// Hex SHA-256 of the canonical JSON of everything that determines a run
// except the seed.
std::string cell_config_hash(const RunCell& cell, const std::string& program_hash);

struct RunRecord {
  std::string task;
  Method method = Method::ITeach;
  std::size_t episodes = 0;
  FeedbackMode feedback_mode = FeedbackMode::Both;
  bool warm_start = true;
  double beta_deg = 20.0;
  std::uint64_t seed = 0;
  double success_rate = 0.0;
  double correction_rate = 0.0;
  std::string config_hash;
};

// Run summary: byte-stable for a given (config, seed); timing lives in a
// separate sidecar.
// The "metrics" object of a run summary.
std::string run_metrics_json(const RunMetrics& metrics);
std::string run_summary_json(const RunCell& cell, const RunMetrics& metrics);
RunRecord run_record_from_summary(const std::string& text);

struct GridFailure {
  std::string cell;
  std::string message;
};

struct GridResult {
  std::vector<RunRecord> records;  // grid order, successful cells only
  std::vector<GridFailure> failures;
  std::size_t executed = 0;
  std::size_t skipped = 0;  // already complete on disk
  std::string csv_path;
};

struct GridHooks {
  std::function<void(const RunCell&, bool skipped)> on_cell_done;
};

// Executes (or resumes) the grid and writes runs/*.json plus results.csv
// under cfg.output_dir. Cell failures are collected, not thrown.
GridResult run_grid(const ExperimentConfig& cfg, const GridHooks& hooks = {});

// Resolves the teacher program for a task: scripted, or generated through the
// configured endpoint and cache.
CodePolicyProgram resolve_program(const TaskSpec& task, const ExperimentConfig& cfg);

// ---- CSV and reports ---------------------------------------------------------

inline constexpr const char* kResultsCsvHeader =
    "task,method,episodes,feedback_mode,warm_start,beta,seed,success_rate,correction_rate,config_hash";

std::string results_csv(const std::vector<RunRecord>& rows);
// Throws Error(Schema) naming `source` when a required column is missing.
std::vector<RunRecord> parse_results_csv(const std::string& text, const std::string& source);

struct ReportFiles {
  std::vector<std::string> written;
};

// Table (text + CSV) and the three plot-data CSVs. Nothing is written when
// the input holds no rows.
ReportFiles write_report(const std::vector<std::string>& csv_paths, const std::string& out_dir);

}  // namespace iteach
