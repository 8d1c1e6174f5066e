#include "iteach/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "json.hpp"

#include "iteach/error.hpp"

namespace iteach {

std::vector<double> encode_features(const EnvState& state, double position_scale) {
  if (state.objects.size() > kMaxObjects)
    throw Error(ErrorCode::InvalidArgument, "encode_features: more objects than feature slots");
  std::vector<double> f(kFeatureDim, 0.0);
  const Vec3 g = state.gripper_pos;
  f[0] = g.x * position_scale;
  f[1] = g.y * position_scale;
  f[2] = g.z * position_scale;
  f[3] = state.gripper_closed ? 1.0 : 0.0;
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    const auto& o = state.objects[i];
    const Vec3 rel = o.pos - g;
    double* slot = f.data() + 4 + 4 * i;
    slot[0] = rel.x * position_scale;
    slot[1] = rel.y * position_scale;
    slot[2] = rel.z * position_scale;
    slot[3] = o.kind == ObjectKind::FreeBody ? (state.attached_object == i ? 1.0 : 0.0) : o.joint_value;
  }
  return f;
}

std::size_t PolicyArchitecture::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) n += layers[l] * layers[l + 1] + layers[l + 1];
  return n;
}

void PolicyArchitecture::validate() const {
  if (layers.size() < 2) throw Error(ErrorCode::InvalidArgument, "policy: need at least input and output layers");
  if (layers.back() != 4) throw Error(ErrorCode::InvalidArgument, "policy: output layer must have 4 units");
  for (auto w : layers)
    if (w == 0) throw Error(ErrorCode::InvalidArgument, "policy: zero-width layer");
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "policy: sigma must be positive");
  if (!(action_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "policy: action_scale must be positive");
}

PolicyModel::PolicyModel(PolicyArchitecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < arch_.layers.size(); ++l) {
    offsets_.push_back(off);
    off += arch_.layers[l] * arch_.layers[l + 1] + arch_.layers[l + 1];
  }
  params_.assign(off, 0.0);
}

PolicyModel PolicyModel::initialized(PolicyArchitecture arch, Rng& rng, double output_init_scale) {
  PolicyModel m(std::move(arch));
  const auto& L = m.arch_.layers;
  for (std::size_t l = 0; l + 1 < L.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(L[l] + L[l + 1]));
    const double scale = (l + 2 == L.size()) ? output_init_scale : 1.0;
    double* w = m.params_.data() + m.weight_offset(l);
    for (std::size_t k = 0; k < L[l] * L[l + 1]; ++k) w[k] = scale * rng.uniform(-limit, limit);
  }
  return m;
}

namespace {

// y = b + x * Wt for one sample; Wt is (in x out) row-major.
inline void affine(const double* x, std::size_t in, const double* wt, const double* b, std::size_t out, double* y) {
  std::copy(b, b + out, y);
  for (std::size_t i = 0; i < in; ++i) {
    const double a = x[i];
    if (a == 0.0) continue;
    const double* row = wt + i * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += a * row[o];
  }
}

inline double sigmoid(double l) {
  if (l >= 0.0) return 1.0 / (1.0 + std::exp(-l));
  const double e = std::exp(l);
  return e / (1.0 + e);
}

inline double softplus(double l) { return std::max(l, 0.0) + std::log1p(std::exp(-std::abs(l))); }

}  // namespace

PolicyHead PolicyModel::forward(std::span<const double> features) const {
  const auto& L = arch_.layers;
  if (features.size() != L.front())
    throw Error(ErrorCode::InvalidArgument, "forward: expected " + std::to_string(L.front()) + " features, got " +
                                                std::to_string(features.size()));
  const std::size_t widest = *std::max_element(L.begin(), L.end());
  std::vector<double> cur(features.begin(), features.end());
  std::vector<double> next(widest);
  for (std::size_t l = 0; l + 1 < L.size(); ++l) {
    affine(cur.data(), L[l], params_.data() + weight_offset(l), params_.data() + bias_offset(l), L[l + 1], next.data());
    if (l + 2 < L.size())
      for (std::size_t o = 0; o < L[l + 1]; ++o) next[o] = std::tanh(next[o]);
    cur.assign(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(L[l + 1]));
  }
  PolicyHead h;
  h.mu = Vec3{cur[0], cur[1], cur[2]} * arch_.action_scale;
  h.gripper_logit = cur[3];
  if (!h.mu.finite() || !std::isfinite(h.gripper_logit)) throw Error(ErrorCode::Numeric, "forward: non-finite output");
  return h;
}

Action sample_action(const PolicyModel& model, std::span<const double> features, Rng& rng, double max_step,
                     double sigma) {
  const PolicyHead h = model.forward(features);
  const double s = sigma < 0.0 ? model.architecture().sigma : sigma;
  Vec3 t = h.mu;
  if (s > 0.0) {
    t.x += s * rng.normal();
    t.y += s * rng.normal();
    t.z += s * rng.normal();
  }
  return {clip_norm(t, max_step), sigmoid(h.gripper_logit) > 0.5 ? GripperCommand::Close : GripperCommand::Open};
}

Action mean_action(const PolicyModel& model, std::span<const double> features, double max_step) {
  const PolicyHead h = model.forward(features);
  return {clip_norm(h.mu, max_step), sigmoid(h.gripper_logit) > 0.5 ? GripperCommand::Close : GripperCommand::Open};
}

LossEvaluator::LossEvaluator(const PolicyArchitecture& arch) {
  arch.validate();
  max_width_ = *std::max_element(arch.layers.begin(), arch.layers.end());
  act_.resize(arch.layers.size());
}

double LossEvaluator::evaluate(const PolicyModel& model, std::span<const WeightedSample* const> batch,
                               std::vector<double>& grad, bool want_grad) {
  const auto& arch = model.architecture();
  const auto& L = arch.layers;
  const std::size_t B = batch.size();
  const std::size_t nl = L.size() - 1;  // number of affine layers
  if (B == 0) throw Error(ErrorCode::InvalidArgument, "loss_and_grad: empty batch");
  if (L.size() != act_.size()) throw Error(ErrorCode::InvalidArgument, "loss_and_grad: evaluator/model mismatch");
  const double* P = model.params().data();

  for (std::size_t l = 0; l < L.size(); ++l) act_[l].resize(B * L[l]);
  for (std::size_t s = 0; s < B; ++s) {
    const auto& f = batch[s]->features;
    if (f.size() != L[0])
      throw Error(ErrorCode::InvalidArgument, "loss_and_grad: sample " + std::to_string(s) + " has wrong feature width");
    std::copy(f.begin(), f.end(), act_[0].begin() + static_cast<std::ptrdiff_t>(s * L[0]));
  }
  for (std::size_t l = 0; l < nl; ++l) {
    const double* wt = P + model.weight_offset(l);
    const double* b = P + model.bias_offset(l);
    for (std::size_t s = 0; s < B; ++s) {
      double* y = act_[l + 1].data() + s * L[l + 1];
      affine(act_[l].data() + s * L[l], L[l], wt, b, L[l + 1], y);
      if (l + 1 < nl)
        for (std::size_t o = 0; o < L[l + 1]; ++o) y[o] = std::tanh(y[o]);
    }
  }

  const double sigma = arch.sigma;
  const double inv_var = 1.0 / (sigma * sigma);
  const double log_norm = std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
  const double scale = arch.action_scale;
  const double invB = 1.0 / static_cast<double>(B);

  delta_.assign(B * L[nl], 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < B; ++s) {
    const WeightedSample& ws = *batch[s];
    const double* out = act_[nl].data() + s * L[nl];
    const double a[3] = {ws.action.translation.x, ws.action.translation.y, ws.action.translation.z};
    const double g = ws.action.gripper == GripperCommand::Close ? 1.0 : 0.0;
    double term = 0.0;
    double* d = delta_.data() + s * L[nl];
    for (int k = 0; k < 3; ++k) {
      const double diff = scale * out[k] - a[k];
      term += 0.5 * diff * diff * inv_var + log_norm;
      d[k] = ws.q * diff * inv_var * scale * invB;
    }
    const double logit = out[3];
    term += softplus(logit) - g * logit;
    d[3] = ws.q * (sigmoid(logit) - g) * invB;
    const double contrib = ws.q * term;
    if (!std::isfinite(contrib) || !std::isfinite(d[0]) || !std::isfinite(d[1]) || !std::isfinite(d[2]))
      throw Error(ErrorCode::Numeric, "loss_and_grad: non-finite value at sample " + std::to_string(s));
    total += contrib;
  }
  const double loss = total * invB;
  if (!want_grad) return loss;

  grad.assign(model.params().size(), 0.0);
  for (std::size_t l = nl; l-- > 0;) {
    const std::size_t in = L[l], out = L[l + 1];
    double* gw = grad.data() + model.weight_offset(l);
    double* gb = grad.data() + model.bias_offset(l);
    const double* wt = P + model.weight_offset(l);
    for (std::size_t s = 0; s < B; ++s) {
      const double* d = delta_.data() + s * out;
      const double* x = act_[l].data() + s * in;
      for (std::size_t o = 0; o < out; ++o) gb[o] += d[o];
      for (std::size_t i = 0; i < in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        double* row = gw + i * out;
        for (std::size_t o = 0; o < out; ++o) row[o] += xi * d[o];
      }
    }
    if (l == 0) break;
    delta_prev_.assign(B * in, 0.0);
    for (std::size_t s = 0; s < B; ++s) {
      const double* d = delta_.data() + s * out;
      const double* x = act_[l].data() + s * in;
      double* dp = delta_prev_.data() + s * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double* row = wt + i * out;
        double acc0 = 0.0, acc1 = 0.0;
        std::size_t o = 0;
        for (; o + 1 < out; o += 2) {
          acc0 += row[o] * d[o];
          acc1 += row[o + 1] * d[o + 1];
        }
        if (o < out) acc0 += row[o] * d[o];
        dp[i] = (acc0 + acc1) * (1.0 - x[i] * x[i]);
      }
    }
    delta_.swap(delta_prev_);
  }
  return loss;
}

namespace {

std::vector<const WeightedSample*> pointers(std::span<const WeightedSample> batch) {
  std::vector<const WeightedSample*> p;
  p.reserve(batch.size());
  for (const auto& s : batch) p.push_back(&s);
  return p;
}

}  // namespace

LossGrad loss_and_grad(const PolicyModel& model, std::span<const WeightedSample> batch) {
  LossEvaluator ev(model.architecture());
  LossGrad out;
  const auto ptrs = pointers(batch);
  out.loss = ev.evaluate(model, ptrs, out.grad, true);
  return out;
}

double loss_only(const PolicyModel& model, std::span<const WeightedSample> batch) {
  LossEvaluator ev(model.architecture());
  std::vector<double> unused;
  const auto ptrs = pointers(batch);
  return ev.evaluate(model, ptrs, unused, false);
}

double grad_check(const PolicyModel& model, std::span<const WeightedSample> batch, double h, std::size_t max_params,
                  std::uint64_t subsample_seed) {
  LossEvaluator ev(model.architecture());
  const auto ptrs = pointers(batch);
  std::vector<double> analytic;
  ev.evaluate(model, ptrs, analytic, true);

  std::vector<std::size_t> idx(model.params().size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_params > 0 && max_params < idx.size()) {
    Rng rng(subsample_seed);
    for (std::size_t i = 0; i < max_params; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(max_params);
  }

  // Components far below the gradient's scale sit under the difference
  // quotient's rounding noise; they are measured against 1e-3 of the largest.
  double gmax = 0.0;
  for (double g : analytic) gmax = std::max(gmax, std::abs(g));
  const double floor = std::max(1e-8, 1e-3 * gmax);

  PolicyModel probe = model;
  std::vector<double> unused;
  double worst = 0.0;
  for (std::size_t k : idx) {
    const double orig = probe.params()[k];
    probe.params()[k] = orig + h;
    const double up = ev.evaluate(probe, ptrs, unused, false);
    probe.params()[k] = orig - h;
    const double down = ev.evaluate(probe, ptrs, unused, false);
    probe.params()[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[k] - numeric) / std::max(floor, std::abs(analytic[k]) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

OptimizerState OptimizerState::for_model(const PolicyModel& model, AdamConfig cfg) {
  OptimizerState s;
  s.config = cfg;
  s.m.assign(model.params().size(), 0.0);
  s.v.assign(model.params().size(), 0.0);
  return s;
}

void optimize_step(PolicyModel& model, OptimizerState& st, std::span<const double> grad) {
  auto p = model.params();
  if (grad.size() != p.size() || st.m.size() != p.size() || st.v.size() != p.size())
    throw Error(ErrorCode::InvalidArgument, "optimize_step: gradient/parameter shape mismatch");
  const auto& c = st.config;
  ++st.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  const double step_size = c.learning_rate / bc1;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = grad[i];
    st.m[i] = c.beta1 * st.m[i] + (1.0 - c.beta1) * g;
    st.v[i] = c.beta2 * st.v[i] + (1.0 - c.beta2) * g * g;
    p[i] -= step_size * st.m[i] / (std::sqrt(st.v[i]) * inv_sqrt_bc2 + c.epsilon);
  }
}

std::string model_to_json(const PolicyModel& model) {
  const auto& a = model.architecture();
  nlohmann::ordered_json j;
  j["format"] = "iteach-policy";
  j["feature_schema"] = a.feature_schema;
  j["d_in"] = a.input_dim();
  j["layers"] = a.layers;
  j["sigma"] = a.sigma;
  j["action_scale"] = a.action_scale;
  j["params"] = std::vector<double>(model.params().begin(), model.params().end());
  return j.dump() + "\n";
}

PolicyModel model_from_json(const std::string& text, std::size_t expected_input_dim) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "iteach-policy") throw Error(ErrorCode::Schema, "not a policy checkpoint");
    PolicyArchitecture a;
    a.feature_schema = j.at("feature_schema").get<int>();
    a.layers = j.at("layers").get<std::vector<std::size_t>>();
    a.sigma = j.at("sigma").get<double>();
    a.action_scale = j.at("action_scale").get<double>();
    const auto d_in = j.at("d_in").get<std::size_t>();
    if (a.feature_schema != kFeatureSchemaVersion)
      throw Error(ErrorCode::Schema, "checkpoint feature schema " + std::to_string(a.feature_schema) +
                                         " does not match " + std::to_string(kFeatureSchemaVersion));
    if (a.layers.empty() || d_in != a.layers.front()) throw Error(ErrorCode::Schema, "checkpoint header is inconsistent");
    if (expected_input_dim != 0 && d_in != expected_input_dim)
      throw Error(ErrorCode::Schema, "checkpoint input width " + std::to_string(d_in) + " does not match " +
                                         std::to_string(expected_input_dim));
    PolicyModel m(a);
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != m.params().size()) throw Error(ErrorCode::Schema, "checkpoint parameter count mismatch");
    for (double v : params)
      if (!std::isfinite(v)) throw Error(ErrorCode::Schema, "checkpoint holds non-finite parameters");
    std::copy(params.begin(), params.end(), m.params().begin());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace iteach
