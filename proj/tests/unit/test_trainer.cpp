#include <cmath>

#include "doctest.h"
#include "iteach/error.hpp"
#include "iteach/experiment.hpp"
#include "iteach/trainer.hpp"

using namespace iteach;

namespace {

TrainerConfig small_cfg() {
  TrainerConfig c;
  c.training_episodes = 30;
  c.eval_episodes = 20;
  c.warm_start_demos = 3;
  c.warm_start_epochs = 5;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("sample weights") {
    EpisodeFeedbackStats st{100, 25};
    CHECK(feedback_weight(FeedbackKind::Corrective, st) == 4.0);
    CHECK(feedback_weight(FeedbackKind::Evaluative, st) == 1.0);
    CHECK(feedback_weight(FeedbackKind::Withheld, st) == 0.0);
    EpisodeFeedbackStats none{40, 0};
    CHECK(feedback_weight(FeedbackKind::Evaluative, none) == 1.0);
    CHECK_THROWS_AS(feedback_weight(FeedbackKind::Corrective, none), Error);
  }

  TEST_CASE("episode bookkeeping under varied feedback") {
    const Simulator sim(find_builtin_task("pick_lift"));
    const CodePolicyProgram prog = scripted_program(sim.task());
    Rng rng(17);
    std::size_t aborted = 0, with_corrections = 0;
    for (int e = 0; e < 150; ++e) {
      TrainerConfig cfg;
      cfg.max_episode_steps = 20 + rng.below(120);
      cfg.feedback.beta_deg = rng.uniform(0.0, 180.0);
      Rng init = rng.fork("m" + std::to_string(e));
      const PolicyModel model = PolicyModel::initialized({}, init, rng.uniform(0.0, 2.0));
      Rng ep_rng = rng.fork("e" + std::to_string(e));
      const EpisodeResult ep = rollout_iil_episode(sim, prog, model, cfg, ep_rng);
      REQUIRE(ep.samples.size() == ep.steps.size());
      CHECK(ep.stats.steps == ep.steps.size());
      CHECK(ep.aborted == !ep.success);
      if (ep.aborted) {
        ++aborted;
        CHECK(ep.steps.size() == cfg.max_episode_steps);
      }
      const double n = static_cast<double>(ep.stats.steps);
      std::size_t nc = 0;
      double corrective_sum = 0.0;
      for (std::size_t i = 0; i < ep.steps.size(); ++i) {
        const auto& s = ep.steps[i];
        CHECK(ep.samples[i].q == s.q);
        if (s.feedback == FeedbackKind::Corrective) {
          ++nc;
          CHECK(ep.samples[i].action == s.teacher_action);
          corrective_sum += s.q;
        } else {
          CHECK(s.q == 1.0);
          CHECK(ep.samples[i].action == s.agent_action);
        }
      }
      CHECK(nc == ep.stats.corrective);
      if (nc > 0) {
        ++with_corrections;
        for (const auto& s : ep.steps)
          if (s.feedback == FeedbackKind::Corrective) CHECK(s.q == n / static_cast<double>(nc));
        CHECK(std::fabs(corrective_sum - n) <= 1e-9 * n);
      }
    }
    CHECK(aborted > 0);
    CHECK(with_corrections > 0);
  }

  TEST_CASE("aborted episodes never reach the buffer") {
    TrainerConfig cfg = small_cfg();
    cfg.use_warm_start = false;
    cfg.max_episode_steps = 40;  // short enough that many episodes abort
    const Simulator sim(find_builtin_task("pick_lift"));
    std::size_t kept = 0, aborted = 0;
    TrainHooks hooks;
    hooks.on_episode = [&](std::size_t, const EpisodeResult& ep) {
      if (ep.aborted)
        ++aborted;
      else
        kept += ep.samples.size();
    };
    const TrainResult r = train_llm_iteach(sim, scripted_program(sim.task()), cfg, 3, hooks);
    CHECK(aborted > 0);
    CHECK(r.metrics.dataset_samples == kept);
  }

  TEST_CASE("warm start disabled leaves the model alone") {
    TrainerConfig cfg = small_cfg();
    cfg.use_warm_start = false;
    const Simulator sim(find_builtin_task("reach_target"));
    PolicyModel m = initial_model(cfg, 4);
    const PolicyModel before = m;
    OptimizerState opt = OptimizerState::for_model(m, cfg.adam);
    Rng rng(1);
    CHECK(run_warm_start(sim, scripted_program(sim.task()), m, opt, cfg, rng).empty());
    CHECK(m == before);
  }

  TEST_CASE("warm start beats the untrained policy on reach") {
    TrainerConfig cfg = small_cfg();
    cfg.warm_start_demos = 10;
    cfg.warm_start_epochs = 50;
    const Simulator sim(find_builtin_task("reach_target"));
    double warm = 0.0, cold = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      warm += train_warm_start_only(sim, scripted_program(sim.task()), cfg, seed).metrics.final_success_rate;
      cold += evaluate(initial_model(cfg, seed), sim, cfg, seed);
    }
    CHECK(warm > cold);
  }

  TEST_CASE("identical demo seeds give identical demos") {
    TrainerConfig cfg = small_cfg();
    const Simulator sim(find_builtin_task("reach_target"));
    Rng a(5), b(5);
    const auto d1 = collect_demo_samples(sim, scripted_program(sim.task()), cfg, 4, 10, a);
    const auto d2 = collect_demo_samples(sim, scripted_program(sim.task()), cfg, 4, 10, b);
    REQUIRE(d1.size() == d2.size());
    for (std::size_t i = 0; i < d1.size(); ++i) {
      CHECK(d1[i].features == d2[i].features);
      CHECK(d1[i].action == d2[i].action);
    }
    cfg.max_episode_steps = 1;
    Rng c(5);
    CHECK_THROWS_AS(collect_demo_samples(sim, scripted_program(sim.task()), cfg, 2, 5, c), Error);
  }

  TEST_CASE("epoch training step count") {
    TrainerConfig cfg;
    PolicyModel m = initial_model(cfg, 1);
    OptimizerState opt = OptimizerState::for_model(m, cfg.adam);
    std::vector<WeightedSample> data(130, WeightedSample{std::vector<double>(kFeatureDim, 0.1), {}, 1.0});
    Rng rng(2);
    CHECK(train_epochs(m, opt, data, 3, 64, rng) == 3 * 3);
  }

  TEST_CASE("evaluative feedback alone from scratch never succeeds") {
    TrainerConfig cfg = small_cfg();
    cfg.use_warm_start = false;
    cfg.feedback.mode = FeedbackMode::EvaluativeOnly;
    for (const char* task : {"reach_target", "pick_lift"}) {
      const Simulator sim(find_builtin_task(task));
      const TrainResult r = train_llm_iteach(sim, scripted_program(sim.task()), cfg, 1);
      CHECK(r.metrics.final_success_rate == 0.0);
      CHECK(r.metrics.mean_correction_rate() == 0.0);
    }
  }

  TEST_CASE("interleaved runs are reproducible") {
    const TrainerConfig cfg = small_cfg();
    const Simulator sim(find_builtin_task("reach_target"));
    RunCell cell;
    cell.task = "reach_target";
    cell.seed = 9;
    cell.trainer = cfg;
    cell.episodes = cfg.training_episodes;
    const TrainResult a = train_llm_iteach(sim, scripted_program(sim.task()), cfg, 9);
    const TrainResult b = train_llm_iteach(sim, scripted_program(sim.task()), cfg, 9);
    CHECK(a.model == b.model);
    CHECK(run_summary_json(cell, a.metrics) == run_summary_json(cell, b.metrics));
    const TrainResult c = train_llm_iteach(sim, scripted_program(sim.task()), cfg, 10);
    CHECK_FALSE(a.model == c.model);
  }

  TEST_CASE("concurrent mode completes its gradient budget") {
    TrainerConfig cfg = small_cfg();
    cfg.mode = TrainMode::Concurrent;
    const Simulator sim(find_builtin_task("reach_target"));
    const TrainResult r = train_llm_iteach(sim, scripted_program(sim.task()), cfg, 2);
    CHECK(r.metrics.episodes.size() == cfg.training_episodes);
    TrainerConfig cold = cfg;
    cold.use_warm_start = false;
    const TrainResult q = train_llm_iteach(sim, scripted_program(sim.task()), cold, 2);
    CHECK(q.metrics.gradient_steps <= cfg.training_episodes * cfg.grad_steps_per_episode);
    CHECK(r.metrics.final_success_rate >= 0.0);
  }

  TEST_CASE("behaviour cloning honours an explicit gradient budget") {
    TrainerConfig cfg = small_cfg();
    cfg.bc_grad_steps = 37;
    const Simulator sim(find_builtin_task("reach_target"));
    const TrainResult r = train_bc(sim, scripted_program(sim.task()), cfg, 5, 1);
    CHECK(r.metrics.gradient_steps == 37);
    CHECK(r.metrics.dataset_samples > 0);
  }

  TEST_CASE("evaluation stream is shared across policies") {
    const TrainerConfig cfg = small_cfg();
    const Simulator sim(find_builtin_task("reach_target"));
    const PolicyModel m = initial_model(cfg, 1);
    CHECK(evaluate(m, sim, cfg, 3) == evaluate(m, sim, cfg, 3));
    CHECK(evaluate_teacher(scripted_program(sim.task()), sim, cfg, 3) == 1.0);
  }

  TEST_CASE("correction rate helpers") {
    RunMetrics m;
    for (double c : {0.5, 0.4, 0.2, 0.1}) m.episodes.push_back(EpisodeMetrics{false, false, 10, c, 0.0});
    CHECK(m.mean_correction_rate() == doctest::Approx(0.3));
    CHECK(m.correction_rate_between(0, 2) == doctest::Approx(0.45));
    CHECK(m.correction_rate_between(2, 4) == doctest::Approx(0.15));
  }

  TEST_CASE("config validation") {
    TrainerConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = TrainerConfig{};
    c.position_scale = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(train_mode_from_string(to_string(TrainMode::Concurrent)) == TrainMode::Concurrent);
  }
}
