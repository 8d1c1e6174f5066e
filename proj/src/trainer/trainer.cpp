#include "iteach/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include "iteach/error.hpp"

namespace iteach {

const char* to_string(TrainMode m) { return m == TrainMode::Concurrent ? "concurrent" : "interleaved"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "interleaved") return TrainMode::Interleaved;
  if (s == "concurrent") return TrainMode::Concurrent;
  throw Error(ErrorCode::InvalidArgument, "unknown training mode '" + s + "'");
}

void TrainerConfig::validate() const {
  if (max_episode_steps == 0 || warm_start_demos == 0 || warm_start_max_attempts == 0 || batch_size == 0 ||
      eval_episodes == 0 || grad_steps_per_episode == 0)
    throw Error(ErrorCode::InvalidArgument, "trainer: counts must be positive");
  if (warm_start_max_attempts < warm_start_demos)
    throw Error(ErrorCode::InvalidArgument, "trainer: warm-start attempts below the demonstration count");
  feedback.validate();
  policy.validate();
  if (policy.input_dim() != kFeatureDim)
    throw Error(ErrorCode::InvalidArgument, "trainer: policy input width must equal the feature width");
  if (!(position_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "trainer: position_scale must be positive");
}

double RunMetrics::mean_correction_rate() const { return correction_rate_between(0, episodes.size()); }

double RunMetrics::correction_rate_between(std::size_t begin, std::size_t end) const {
  end = std::min(end, episodes.size());
  if (begin >= end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += episodes[i].correction_rate;
  return s / static_cast<double>(end - begin);
}

double feedback_weight(FeedbackKind kind, const EpisodeFeedbackStats& stats) {
  switch (kind) {
    case FeedbackKind::Evaluative: return 1.0;
    case FeedbackKind::Withheld: return 0.0;
    case FeedbackKind::Corrective:
      if (stats.corrective == 0) throw Error(ErrorCode::Internal, "corrective sample in an episode without corrections");
      return static_cast<double>(stats.steps) / static_cast<double>(stats.corrective);
  }
  return 1.0;
}

EpisodeResult rollout_iil_episode(const Simulator& sim, const CodePolicyProgram& program, const PolicyModel& model,
                                  const TrainerConfig& cfg, Rng& rng) {
  const double max_step = sim.workspace().max_step;
  EpisodeResult ep;
  EnvState state = sim.reset(rng);
  std::size_t counter = 0;
  ep.samples.reserve(cfg.max_episode_steps);
  ep.steps.reserve(cfg.max_episode_steps);
  while (ep.steps.size() < cfg.max_episode_steps) {
    std::vector<double> features = encode_features(state, cfg.position_scale);
    const Action agent = sample_action(model, features, rng, max_step);
    const PolicyOutput teacher = evaluate_policy(program, GroundingView(state, counter), counter, max_step);
    counter = teacher.counter;
    const Feedback fb = give_feedback(agent, teacher.action, cfg.feedback);
    const Action executed = fb.is_corrective() ? *fb.teacher_action : agent;

    StepRecord rec;
    rec.t = ep.steps.size();
    rec.gripper_pos = state.gripper_pos;
    rec.gripper_closed = state.gripper_closed;
    rec.plan_step = counter;
    rec.agent_action = agent;
    rec.teacher_action = teacher.action;
    rec.feedback = fb.kind;
    rec.executed_action = executed;
    ep.steps.push_back(rec);
    ep.samples.push_back({std::move(features), executed, 0.0});
    if (fb.is_corrective()) ++ep.stats.corrective;

    state = sim.step(state, executed);
    if (sim.is_success(state)) {
      ep.success = true;
      break;
    }
  }
  ep.stats.steps = ep.steps.size();
  ep.aborted = !ep.success;
  for (std::size_t i = 0; i < ep.steps.size(); ++i) {
    const double q = feedback_weight(ep.steps[i].feedback, ep.stats);
    ep.steps[i].q = q;
    ep.samples[i].q = q;
  }
  return ep;
}

std::vector<WeightedSample> collect_demo_samples(const Simulator& sim, const CodePolicyProgram& program,
                                                 const TrainerConfig& cfg, std::size_t count, std::size_t max_attempts,
                                                 Rng& rng) {
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "demonstration count must be positive");
  std::vector<WeightedSample> data;
  std::size_t got = 0;
  for (std::size_t attempt = 0; attempt < max_attempts && got < count; ++attempt) {
    Rng episode_rng = rng.fork("demo-" + std::to_string(attempt));
    const Demonstration demo = collect_demonstration(sim, program, episode_rng, cfg.max_episode_steps);
    if (!demo.success) continue;
    ++got;
    for (const auto& s : demo.trajectory.samples)
      data.push_back({encode_features(s.state, cfg.position_scale), s.action, 1.0});
  }
  if (got < count)
    throw Error(ErrorCode::Experiment, "teacher too weak for " + sim.task().name + ": " + std::to_string(got) +
                                           " successful demonstrations in " + std::to_string(max_attempts) + " attempts");
  return data;
}

std::size_t train_epochs(PolicyModel& model, OptimizerState& opt, const std::vector<WeightedSample>& data,
                         std::size_t epochs, std::size_t batch_size, Rng& rng) {
  if (data.empty()) return 0;
  LossEvaluator ev(model.architecture());
  std::vector<double> grad;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const WeightedSample*> batch;
  std::size_t steps = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) batch.push_back(&data[order[k]]);
      ev.evaluate(model, batch, grad);
      optimize_step(model, opt, grad);
      ++steps;
    }
  }
  return steps;
}

std::vector<WeightedSample> run_warm_start(const Simulator& sim, const CodePolicyProgram& program, PolicyModel& model,
                                           OptimizerState& opt, const TrainerConfig& cfg, Rng& rng,
                                           std::size_t* steps_taken) {
  if (steps_taken) *steps_taken = 0;
  if (!cfg.use_warm_start) return {};
  Rng demo_rng = rng.fork("warm-start-demos");
  Rng fit_rng = rng.fork("warm-start-fit");
  auto data = collect_demo_samples(sim, program, cfg, cfg.warm_start_demos, cfg.warm_start_max_attempts, demo_rng);
  const std::size_t steps = train_epochs(model, opt, data, cfg.warm_start_epochs, cfg.batch_size, fit_rng);
  if (steps_taken) *steps_taken = steps;
  return data;
}

PolicyModel initial_model(const TrainerConfig& cfg, std::uint64_t seed) {
  Rng rng = Rng(seed).fork("init");
  return PolicyModel::initialized(cfg.policy, rng, cfg.output_init_scale);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

EpisodeMetrics episode_metrics(const EpisodeResult& ep) {
  EpisodeMetrics m;
  m.success = ep.success;
  m.aborted = ep.aborted;
  m.length = ep.stats.steps;
  m.correction_rate = ep.stats.correction_rate();
  return m;
}

// Uniform-with-replacement minibatch.
void sample_batch(const std::vector<WeightedSample>& buffer, std::size_t batch_size, Rng& rng,
                  std::vector<const WeightedSample*>& out) {
  out.clear();
  for (std::size_t k = 0; k < batch_size; ++k) out.push_back(&buffer[rng.below(buffer.size())]);
}

TrainResult train_interleaved(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                              std::uint64_t seed, const TrainHooks& hooks) {
  const auto t0 = Clock::now();
  const Rng root(seed);
  PolicyModel model = initial_model(cfg, seed);
  OptimizerState opt = OptimizerState::for_model(model, cfg.adam);
  Rng ws_rng = root.fork("warm-start");
  std::size_t steps = 0;
  std::vector<WeightedSample> buffer = run_warm_start(sim, program, model, opt, cfg, ws_rng, &steps);
  if (!cfg.keep_warm_start_in_buffer) buffer.clear();

  Rng train_rng = root.fork("train");
  LossEvaluator ev(model.architecture());
  std::vector<double> grad;
  std::vector<const WeightedSample*> batch;
  RunMetrics metrics;
  metrics.seed = seed;
  for (std::size_t e = 0; e < cfg.training_episodes; ++e) {
    Rng ep_rng = root.fork("episode-" + std::to_string(e));
    EpisodeResult ep = rollout_iil_episode(sim, program, model, cfg, ep_rng);
    EpisodeMetrics em = episode_metrics(ep);
    if (hooks.on_episode) hooks.on_episode(e, ep);
    if (!ep.aborted) std::move(ep.samples.begin(), ep.samples.end(), std::back_inserter(buffer));
    if (!buffer.empty()) {
      double loss_sum = 0.0;
      for (std::size_t g = 0; g < cfg.grad_steps_per_episode; ++g) {
        sample_batch(buffer, cfg.batch_size, train_rng, batch);
        loss_sum += ev.evaluate(model, batch, grad);
        optimize_step(model, opt, grad);
        ++steps;
      }
      em.mean_loss = loss_sum / static_cast<double>(cfg.grad_steps_per_episode);
    }
    metrics.episodes.push_back(em);
  }
  metrics.gradient_steps = steps;
  metrics.dataset_samples = buffer.size();
  metrics.final_success_rate = evaluate(model, sim, cfg, seed);
  metrics.wall_clock_seconds = seconds_since(t0);
  return {std::move(model), std::move(metrics)};
}

// Rollouts on the calling thread, gradient steps on a worker. The worker
// trains a private copy and publishes a snapshot every G steps; it may run at
// most G steps per finished episode ahead of the rollouts.
TrainResult train_concurrent(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                             std::uint64_t seed, const TrainHooks& hooks) {
  const auto t0 = Clock::now();
  const Rng root(seed);
  PolicyModel model = initial_model(cfg, seed);
  OptimizerState opt = OptimizerState::for_model(model, cfg.adam);
  Rng ws_rng = root.fork("warm-start");
  std::size_t warm_steps = 0;
  std::vector<WeightedSample> buffer = run_warm_start(sim, program, model, opt, cfg, ws_rng, &warm_steps);
  if (!cfg.keep_warm_start_in_buffer) buffer.clear();

  std::mutex mu;
  std::condition_variable cv;
  std::shared_ptr<const PolicyModel> snapshot = std::make_shared<const PolicyModel>(model);
  std::size_t episodes_done = 0;
  bool rollouts_finished = false;
  std::size_t steps_done = 0;
  std::vector<double> step_losses;
  std::exception_ptr worker_error;

  std::thread worker([&] {
    try {
      Rng train_rng = root.fork("train");
      LossEvaluator ev(model.architecture());
      std::vector<double> grad;
      std::vector<WeightedSample> local_batch;
      std::vector<const WeightedSample*> ptrs;
      const std::size_t G = cfg.grad_steps_per_episode;
      for (;;) {
        {
          std::unique_lock lock(mu);
          cv.wait(lock, [&] { return (steps_done < G * episodes_done && !buffer.empty()) || rollouts_finished; });
          if (rollouts_finished && (buffer.empty() || steps_done >= G * cfg.training_episodes)) break;
          local_batch.clear();
          for (std::size_t k = 0; k < cfg.batch_size; ++k) local_batch.push_back(buffer[train_rng.below(buffer.size())]);
        }
        ptrs.clear();
        for (const auto& s : local_batch) ptrs.push_back(&s);
        const double loss = ev.evaluate(model, ptrs, grad);
        optimize_step(model, opt, grad);
        std::lock_guard lock(mu);
        ++steps_done;
        step_losses.push_back(loss);
        if (steps_done % G == 0) snapshot = std::make_shared<const PolicyModel>(model);
      }
    } catch (...) {
      std::lock_guard lock(mu);
      worker_error = std::current_exception();
    }
  });

  RunMetrics metrics;
  metrics.seed = seed;
  try {
    for (std::size_t e = 0; e < cfg.training_episodes; ++e) {
      std::shared_ptr<const PolicyModel> current;
      {
        std::lock_guard lock(mu);
        if (worker_error) break;
        current = snapshot;
      }
      Rng ep_rng = root.fork("episode-" + std::to_string(e));
      EpisodeResult ep = rollout_iil_episode(sim, program, *current, cfg, ep_rng);
      metrics.episodes.push_back(episode_metrics(ep));
      if (hooks.on_episode) hooks.on_episode(e, ep);
      {
        std::lock_guard lock(mu);
        if (!ep.aborted) std::move(ep.samples.begin(), ep.samples.end(), std::back_inserter(buffer));
        ++episodes_done;
      }
      cv.notify_all();
    }
  } catch (...) {
    {
      std::lock_guard lock(mu);
      rollouts_finished = true;
    }
    cv.notify_all();
    worker.join();
    throw;
  }
  {
    std::lock_guard lock(mu);
    rollouts_finished = true;
  }
  cv.notify_all();
  worker.join();
  if (worker_error) std::rethrow_exception(worker_error);

  metrics.gradient_steps = warm_steps + steps_done;
  metrics.dataset_samples = buffer.size();
  metrics.final_success_rate = evaluate(model, sim, cfg, seed);
  metrics.wall_clock_seconds = seconds_since(t0);
  return {std::move(model), std::move(metrics)};
}

}  // namespace

TrainResult train_llm_iteach(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                             std::uint64_t seed, const TrainHooks& hooks) {
  cfg.validate();
  validate_program(program, sim.task());
  return cfg.mode == TrainMode::Concurrent ? train_concurrent(sim, program, cfg, seed, hooks)
                                           : train_interleaved(sim, program, cfg, seed, hooks);
}

TrainResult train_bc(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                     std::size_t num_demos, std::uint64_t seed) {
  cfg.validate();
  validate_program(program, sim.task());
  if (num_demos == 0) throw Error(ErrorCode::InvalidArgument, "behavior cloning needs at least one demonstration");
  const auto t0 = Clock::now();
  const Rng root(seed);
  Rng demo_rng = root.fork("bc-demos");
  const auto data = collect_demo_samples(sim, program, cfg, num_demos, std::max<std::size_t>(100, 10 * num_demos), demo_rng);

  PolicyModel model = initial_model(cfg, seed);
  OptimizerState opt = OptimizerState::for_model(model, cfg.adam);
  std::size_t budget = cfg.bc_grad_steps;
  if (budget == 0) {
    // Same total as an interactive run with as many episodes as demonstrations;
    // the warm-start share is estimated from the mean demonstration length.
    std::size_t warm_steps = 0;
    if (cfg.use_warm_start) {
      const std::size_t per_demo = data.size() / num_demos;
      const std::size_t ws_samples = std::max<std::size_t>(1, per_demo * cfg.warm_start_demos);
      warm_steps = cfg.warm_start_epochs * ((ws_samples + cfg.batch_size - 1) / cfg.batch_size);
    }
    budget = warm_steps + num_demos * cfg.grad_steps_per_episode;
  }
  Rng train_rng = root.fork("train");
  LossEvaluator ev(model.architecture());
  std::vector<double> grad;
  std::vector<const WeightedSample*> batch;
  for (std::size_t s = 0; s < budget; ++s) {
    sample_batch(data, cfg.batch_size, train_rng, batch);
    ev.evaluate(model, batch, grad);
    optimize_step(model, opt, grad);
  }
  RunMetrics metrics;
  metrics.seed = seed;
  metrics.gradient_steps = budget;
  metrics.dataset_samples = data.size();
  metrics.final_success_rate = evaluate(model, sim, cfg, seed);
  metrics.wall_clock_seconds = seconds_since(t0);
  return {std::move(model), std::move(metrics)};
}

TrainResult train_warm_start_only(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                                  std::uint64_t seed) {
  cfg.validate();
  const auto t0 = Clock::now();
  const Rng root(seed);
  PolicyModel model = initial_model(cfg, seed);
  OptimizerState opt = OptimizerState::for_model(model, cfg.adam);
  Rng ws_rng = root.fork("warm-start");
  TrainerConfig forced = cfg;
  forced.use_warm_start = true;
  std::size_t steps = 0;
  const auto data = run_warm_start(sim, program, model, opt, forced, ws_rng, &steps);
  RunMetrics metrics;
  metrics.seed = seed;
  metrics.gradient_steps = steps;
  metrics.dataset_samples = data.size();
  metrics.final_success_rate = evaluate(model, sim, cfg, seed);
  metrics.wall_clock_seconds = seconds_since(t0);
  return {std::move(model), std::move(metrics)};
}

double evaluate(const PolicyModel& model, const Simulator& sim, const TrainerConfig& cfg, std::uint64_t seed) {
  const Rng eval_root = Rng(seed).fork("eval");
  const double max_step = sim.workspace().max_step;
  std::size_t successes = 0;
  for (std::size_t i = 0; i < cfg.eval_episodes; ++i) {
    Rng rng = eval_root.fork("episode-" + std::to_string(i));
    EnvState state = sim.reset(rng);
    for (std::size_t t = 0; t < cfg.max_episode_steps; ++t) {
      const auto f = encode_features(state, cfg.position_scale);
      const Action a = cfg.eval_stochastic ? sample_action(model, f, rng, max_step) : mean_action(model, f, max_step);
      state = sim.step(state, a);
      if (sim.is_success(state)) {
        ++successes;
        break;
      }
    }
  }
  return static_cast<double>(successes) / static_cast<double>(cfg.eval_episodes);
}

double evaluate_teacher(const CodePolicyProgram& program, const Simulator& sim, const TrainerConfig& cfg,
                        std::uint64_t seed) {
  const Rng eval_root = Rng(seed).fork("eval");
  std::size_t successes = 0;
  for (std::size_t i = 0; i < cfg.eval_episodes; ++i) {
    Rng rng = eval_root.fork("episode-" + std::to_string(i));
    if (collect_demonstration(sim, program, rng, cfg.max_episode_steps).success) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(cfg.eval_episodes);
}

std::vector<SweepRow> run_beta_sweep(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                                     const std::vector<double>& betas, const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    TrainerConfig c = cfg;
    c.feedback.beta_deg = beta;
    c.feedback.mode = FeedbackMode::Both;
    c.validate();
    for (auto seed : seeds) {
      const TrainResult r = train_llm_iteach(sim, program, c, seed);
      rows.push_back({beta, seed, r.metrics.final_success_rate, r.metrics.mean_correction_rate()});
    }
  }
  return rows;
}

std::vector<AblationRow> run_ablation(const Simulator& sim, const CodePolicyProgram& program, const TrainerConfig& cfg,
                                      const std::vector<std::size_t>& episode_budgets,
                                      const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRow> rows;
  for (FeedbackMode mode : {FeedbackMode::EvaluativeOnly, FeedbackMode::CorrectiveOnly, FeedbackMode::Both}) {
    for (bool warm : {true, false}) {
      for (std::size_t episodes : episode_budgets) {
        TrainerConfig c = cfg;
        c.feedback.mode = mode;
        c.use_warm_start = warm;
        c.training_episodes = episodes;
        for (auto seed : seeds) {
          const TrainResult r = train_llm_iteach(sim, program, c, seed);
          rows.push_back({mode, warm, episodes, seed, r.metrics.final_success_rate, r.metrics.mean_correction_rate()});
        }
      }
    }
  }
  return rows;
}

}  // namespace iteach
