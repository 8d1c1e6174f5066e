#pragma once

#include <cstddef>
#include <string>

#include "iteach/codepolicy.hpp"
#include "iteach/core.hpp"
#include "iteach/rng.hpp"
#include "iteach/simenv.hpp"

namespace iteach {

enum class FeedbackMode { Both, EvaluativeOnly, CorrectiveOnly };

const char* to_string(FeedbackMode m);
FeedbackMode feedback_mode_from_string(const std::string& s);

struct FeedbackConfig {
  double beta_deg = 20.0;
  double epsilon_zero = kZeroNorm;
  FeedbackMode mode = FeedbackMode::Both;

  void validate() const;
};

struct EpisodeFeedbackStats {
  std::size_t steps = 0;        // N
  std::size_t corrective = 0;   // N_c

  double correction_rate() const {
    return steps == 0 ? 0.0 : static_cast<double>(corrective) / static_cast<double>(steps);
  }
};

// Agent and teacher agree when the gripper commands match and the translation
// directions are within beta degrees (strictly). Two null translations agree;
// exactly one null translation disagrees.
bool similar(const Action& agent, const Action& teacher, const FeedbackConfig& cfg);

Feedback give_feedback(const Action& agent, const Action& teacher, const FeedbackConfig& cfg);

struct Demonstration {
  Trajectory trajectory;
  bool success = false;
};

// Rolls the program out in direct control from a fresh reset until success or
// `max_steps`. Records (state, teacher action) per step.
Demonstration collect_demonstration(const Simulator& sim, const CodePolicyProgram& program, Rng& rng,
                                    std::size_t max_steps);

}  // namespace iteach
