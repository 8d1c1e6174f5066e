#include "iteach/feedback.hpp"

#include "iteach/error.hpp"

namespace iteach {

const char* to_string(FeedbackMode m) {
  switch (m) {
    case FeedbackMode::Both: return "both";
    case FeedbackMode::EvaluativeOnly: return "evaluative";
    case FeedbackMode::CorrectiveOnly: return "corrective";
  }
  return "both";
}

FeedbackMode feedback_mode_from_string(const std::string& s) {
  if (s == "both") return FeedbackMode::Both;
  if (s == "evaluative") return FeedbackMode::EvaluativeOnly;
  if (s == "corrective") return FeedbackMode::CorrectiveOnly;
  throw Error(ErrorCode::InvalidArgument, "unknown feedback mode '" + s + "' (expected both|evaluative|corrective)");
}

void FeedbackConfig::validate() const {
  if (!(beta_deg >= 0.0 && beta_deg <= 180.0))
    throw Error(ErrorCode::InvalidArgument, "feedback: beta must lie in [0, 180] degrees");
  if (!(epsilon_zero > 0.0)) throw Error(ErrorCode::InvalidArgument, "feedback: epsilon_zero must be positive");
}

bool similar(const Action& agent, const Action& teacher, const FeedbackConfig& cfg) {
  if (agent.gripper != teacher.gripper) return false;
  const bool agent_null = agent.translation.norm() < cfg.epsilon_zero;
  const bool teacher_null = teacher.translation.norm() < cfg.epsilon_zero;
  if (agent_null || teacher_null) return agent_null && teacher_null;
  const auto angle = angle_between(agent.translation, teacher.translation, cfg.epsilon_zero);
  return angle && *angle < cfg.beta_deg;
}

Feedback give_feedback(const Action& agent, const Action& teacher, const FeedbackConfig& cfg) {
  switch (cfg.mode) {
    case FeedbackMode::CorrectiveOnly: return Feedback::corrective(teacher);
    case FeedbackMode::EvaluativeOnly: return similar(agent, teacher, cfg) ? Feedback::evaluative() : Feedback::withheld();
    case FeedbackMode::Both: break;
  }
  return similar(agent, teacher, cfg) ? Feedback::evaluative() : Feedback::corrective(teacher);
}

Demonstration collect_demonstration(const Simulator& sim, const CodePolicyProgram& program, Rng& rng,
                                    std::size_t max_steps) {
  validate_program(program, sim.task());
  Demonstration demo;
  EnvState state = sim.reset(rng);
  std::size_t counter = 0;
  demo.trajectory.samples.reserve(max_steps);
  while (demo.trajectory.length() < max_steps) {
    const PolicyOutput out = evaluate_policy(program, GroundingView(state, counter), counter, sim.workspace().max_step);
    counter = out.counter;
    demo.trajectory.samples.push_back({state, out.action, std::nullopt});
    state = sim.step(state, out.action);
    if (sim.is_success(state)) {
      demo.success = true;
      break;
    }
  }
  return demo;
}

}  // namespace iteach
