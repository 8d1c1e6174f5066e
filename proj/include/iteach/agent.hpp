#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "iteach/core.hpp"
#include "iteach/rng.hpp"
#include "iteach/simenv.hpp"

namespace iteach {

// ---- State features -----------------------------------------------------

inline constexpr std::size_t kFeatureDim = 4 + 4 * kMaxObjects;
inline constexpr int kFeatureSchemaVersion = 1;

// Layout: [gripper xyz, gripper closed] then per object slot
// [object - gripper xyz, state flag]. The flag is the attachment bit for free
// bodies and the joint value for buttons and prismatic joints. Positions are
// multiplied by `position_scale`; empty slots are zero.
std::vector<double> encode_features(const EnvState& state, double position_scale = 10.0);

// ---- Policy -------------------------------------------------------------

struct PolicyArchitecture {
  std::vector<std::size_t> layers{kFeatureDim, 64, 64, 4};
  double sigma = 0.001;          // meters, fixed
  double action_scale = 0.01;    // mean translation = action_scale * raw output
  int feature_schema = kFeatureSchemaVersion;

  std::size_t input_dim() const { return layers.front(); }
  std::size_t param_count() const;
  void validate() const;
  bool operator==(const PolicyArchitecture&) const = default;
};

struct PolicyHead {
  Vec3 mu;
  double gripper_logit = 0.0;
};

// Feed-forward tanh network. The last layer has four linear units: the first
// three (times action_scale) are the translation mean, the fourth is the
// gripper logit. Parameters are stored layer by layer as a transposed weight
// matrix (in x out, row-major) followed by the bias vector.
class PolicyModel {
 public:
  explicit PolicyModel(PolicyArchitecture arch = {});

  // Glorot-uniform hidden layers; the output layer is scaled by
  // `output_init_scale` (0 gives a zero output layer).
  static PolicyModel initialized(PolicyArchitecture arch, Rng& rng, double output_init_scale = 0.0);

  const PolicyArchitecture& architecture() const noexcept { return arch_; }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + arch_.layers[layer] * arch_.layers[layer + 1];
  }

  PolicyHead forward(std::span<const double> features) const;

  bool operator==(const PolicyModel& o) const { return arch_ == o.arch_ && params_ == o.params_; }

 private:
  PolicyArchitecture arch_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Executed action for a state: translation = clip(mu + sigma z, max_step),
// gripper closes iff sigmoid(logit) > 0.5. `sigma` < 0 uses the model's.
Action sample_action(const PolicyModel& model, std::span<const double> features, Rng& rng, double max_step,
                     double sigma = -1.0);
Action mean_action(const PolicyModel& model, std::span<const double> features, double max_step);

// ---- Learning -----------------------------------------------------------

struct WeightedSample {
  std::vector<double> features;
  Action action;
  double q = 1.0;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean over the batch of q * (-log N(a | mu, sigma^2) + BCE(gripper, logit)).
// Throws Error(Numeric) naming the sample index on a non-finite value.
LossGrad loss_and_grad(const PolicyModel& model, std::span<const WeightedSample> batch);
double loss_only(const PolicyModel& model, std::span<const WeightedSample> batch);

// Reusable scratch for repeated loss/gradient evaluation on batches of
// pointers into a larger dataset.
class LossEvaluator {
 public:
  explicit LossEvaluator(const PolicyArchitecture& arch);
  // Writes the gradient into `grad` (resized to param_count) and returns the loss.
  double evaluate(const PolicyModel& model, std::span<const WeightedSample* const> batch, std::vector<double>& grad,
                  bool want_grad = true);

 private:
  std::size_t max_width_ = 0;
  std::vector<std::vector<double>> act_;     // per layer activations, batch-major
  std::vector<double> delta_, delta_prev_;
};

// Largest relative error between analytic and central-difference gradients.
// Each component's error is relative to max(|analytic| + |numeric|, 1e-3 of
// the largest analytic component).
// `max_params` > 0 checks a random subsample of that many parameters.
double grad_check(const PolicyModel& model, std::span<const WeightedSample> batch, double h = 1e-6,
                  std::size_t max_params = 0, std::uint64_t subsample_seed = 0);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  static OptimizerState for_model(const PolicyModel& model, AdamConfig cfg = {});
};

void optimize_step(PolicyModel& model, OptimizerState& state, std::span<const double> grad);

// ---- Checkpoints ----------------------------------------------------------

std::string model_to_json(const PolicyModel& model);
// Refuses checkpoints whose feature schema or input width differ from
// `expected_input_dim` / kFeatureSchemaVersion (pass 0 to accept any width).
PolicyModel model_from_json(const std::string& text, std::size_t expected_input_dim = kFeatureDim);

}  // namespace iteach
