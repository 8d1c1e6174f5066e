#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iteach/agent.hpp"
#include "iteach/codepolicy.hpp"
#include "iteach/feedback.hpp"
#include "iteach/rng.hpp"
#include "iteach/simenv.hpp"

namespace iteach {

enum class TrainMode {
  // G gradient steps after every episode, single thread, reproducible.
  Interleaved,
  // Rollouts and gradient steps on separate threads over a shared buffer.
  Concurrent,
};

const char* to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainerConfig {
  std::size_t max_episode_steps = 300;  // N_t
  std::size_t warm_start_demos = 10;
  std::size_t warm_start_epochs = 50;
  std::size_t warm_start_max_attempts = 100;
  bool use_warm_start = true;
  // Warm-start demonstrations stay in the interactive training buffer.
  bool keep_warm_start_in_buffer = true;
  std::size_t training_episodes = 400;
  std::size_t grad_steps_per_episode = 20;  // G
  std::size_t batch_size = 64;
  std::size_t eval_episodes = 100;
  bool eval_stochastic = false;
  // BC: total gradient steps; 0 matches the interactive run with
  // training_episodes == number of demonstrations.
  std::size_t bc_grad_steps = 0;
  TrainMode mode = TrainMode::Interleaved;
  FeedbackConfig feedback;
  PolicyArchitecture policy;
  double output_init_scale = 0.0;
  double position_scale = 10.0;
  AdamConfig adam;

  void validate() const;
};

struct StepRecord {
  std::size_t t = 0;
  Vec3 gripper_pos;
  bool gripper_closed = false;
  std::size_t plan_step = 0;
  Action agent_action;
  Action teacher_action;
  FeedbackKind feedback = FeedbackKind::Evaluative;
  Action executed_action;
  double q = 1.0;
};

struct EpisodeResult {
  std::vector<WeightedSample> samples;
  std::vector<StepRecord> steps;
  EpisodeFeedbackStats stats;
  bool success = false;
  bool aborted = false;
};

// Weight of a sample per its feedback: 1 evaluative, N/N_c corrective, 0
// withheld.
double feedback_weight(FeedbackKind kind, const EpisodeFeedbackStats& stats);

// One interactive episode. Aborted episodes (N_t reached without success)
// still return their samples; callers must not train on them.
EpisodeResult rollout_iil_episode(const Simulator& sim, const CodePolicyProgram& program, const PolicyModel& model,
                                  const TrainerConfig& cfg, Rng& rng);

struct EpisodeMetrics {
  bool success = false;
  bool aborted = false;
  std::size_t length = 0;
  double correction_rate = 0.0;
  double mean_loss = 0.0;  // mean over this episode's gradient steps (0 if none)
};

struct RunMetrics {
  std::vector<EpisodeMetrics> episodes;
  double final_success_rate = 0.0;
  std::size_t gradient_steps = 0;
  std::size_t dataset_samples = 0;
  double wall_clock_seconds = 0.0;
  std::string config_hash;
  std::uint64_t seed = 0;

  double mean_correction_rate() const;
  // Mean correction rate over the episodes in [begin, end).
  double correction_rate_between(std::size_t begin, std::size_t end) const;
};

struct TrainResult {
  PolicyModel model;
  RunMetrics metrics;
};

struct TrainHooks {
  std::function<void(std::size_t episode, const EpisodeResult&)> on_episode;
};

// Successful teacher demonstrations as q = 1 samples. Throws Error(Experiment)
// if fewer than `count` succeed within `max_attempts`.
std::vector<WeightedSample> collect_demo_samples(const Simulator& sim, const CodePolicyProgram& program,
                                                 const TrainerConfig& cfg, std::size_t count, std::size_t max_attempts,
                                                 Rng& rng);

// Epoch-based supervised training over `data`. Returns the gradient steps taken.
std::size_t train_epochs(PolicyModel& model, OptimizerState& opt, const std::vector<WeightedSample>& data,
                         std::size_t epochs, std::size_t batch_size, Rng& rng);

// Collects warm-start demonstrations and fits the model to them. Returns the
// demonstration samples (empty when warm start is disabled).
std::vector<WeightedSample> run_warm_start(const Simulator& sim, const CodePolicyProgram& program, PolicyModel& model,
                                           OptimizerState& opt, const TrainerConfig& cfg, Rng& rng,
                                           std::size_t* steps_taken = nullptr);

PolicyModel initial_model(const TrainerConfig& cfg, std::uint64_t seed);

TrainResult train_llm_iteach(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                             std::uint64_t seed, const TrainHooks& hooks = {});

// Behavior cloning on `num_demos` successful teacher demonstrations.
TrainResult train_bc(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                     std::size_t num_demos, std::uint64_t seed);

// Warm start alone, then evaluation.
TrainResult train_warm_start_only(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                                  std::uint64_t seed);

// Success rate over cfg.eval_episodes episodes drawn from the evaluation
// stream of `seed`; identical for every method given the same seed.
double evaluate(const PolicyModel& model, const Simulator& sim, const TrainerConfig& cfg, std::uint64_t seed);
double evaluate_teacher(const CodePolicyProgram& program, const Simulator& sim, const TrainerConfig& cfg,
                        std::uint64_t seed);

struct SweepRow {
  double beta_deg = 0.0;
  std::uint64_t seed = 0;
  double success_rate = 0.0;
  double correction_rate = 0.0;
};

std::vector<SweepRow> run_beta_sweep(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                                     const std::vector<double>& betas, const std::vector<std::uint64_t>& seeds);

struct AblationRow {
  FeedbackMode mode = FeedbackMode::Both;
  bool warm_start = true;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
  double success_rate = 0.0;
  double correction_rate = 0.0;
};

// {evaluative, corrective, both} x {warm start, none} x episode budgets.
std::vector<AblationRow> run_ablation(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                                      const std::vector<std::size_t>& episode_budgets,
                                      const std::vector<std::uint64_t>& seeds);

}  // namespace iteach
