#include <set>

#include "codepolicy/dsl_json.hpp"
#include "iteach/experiment.hpp"

namespace iteach {

using dsl::Json;

namespace {

// Typed, path-aware reads over an object whose keys are all optional.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ParseError(at(it.key()), "unknown key");
  }

  bool has(const char* key) const { return j_.contains(key); }
  const Json& raw(const char* key) const { return j_.at(key); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const char* key, std::size_t& out) const {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ParseError(at(key), "expected a non-negative integer");
    out = v.get<std::size_t>();
  }
  void read(const char* key, int& out) const {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) throw ParseError(at(key), "expected an integer");
    out = v.get<int>();
  }
  void read(const char* key, double& out) const {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number()) throw ParseError(at(key), "expected a number");
    out = v.get<double>();
  }
  void read(const char* key, bool& out) const {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) throw ParseError(at(key), "expected true or false");
    out = v.get<bool>();
  }
  void read(const char* key, std::string& out) const {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_string()) throw ParseError(at(key), "expected a string");
    out = v.get<std::string>();
  }
  template <class T, class F>
  void read_list(const char* key, std::vector<T>& out, F convert) const {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_array()) throw ParseError(at(key), "expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert(v[i], at(key) + "[" + std::to_string(i) + "]"));
  }

 private:
  const Json& j_;
  std::string path_;
};

template <class F>
auto rethrow_as_parse(const std::string& path, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(path, e.what());
  }
}

Json trainer_json(const TrainerConfig& c) {
  Json j;
  j["max_episode_steps"] = c.max_episode_steps;
  j["warm_start_demos"] = c.warm_start_demos;
  j["warm_start_epochs"] = c.warm_start_epochs;
  j["warm_start_max_attempts"] = c.warm_start_max_attempts;
  j["use_warm_start"] = c.use_warm_start;
  j["keep_warm_start_in_buffer"] = c.keep_warm_start_in_buffer;
  j["training_episodes"] = c.training_episodes;
  j["grad_steps_per_episode"] = c.grad_steps_per_episode;
  j["batch_size"] = c.batch_size;
  j["eval_episodes"] = c.eval_episodes;
  j["eval_stochastic"] = c.eval_stochastic;
  j["bc_grad_steps"] = c.bc_grad_steps;
  j["mode"] = to_string(c.mode);
  j["feedback"] = {{"beta_deg", c.feedback.beta_deg},
                   {"epsilon_zero", c.feedback.epsilon_zero},
                   {"mode", to_string(c.feedback.mode)}};
  Json hidden = Json::array();
  for (std::size_t i = 1; i + 1 < c.policy.layers.size(); ++i) hidden.push_back(c.policy.layers[i]);
  j["policy"] = {{"hidden", hidden},
                 {"sigma", c.policy.sigma},
                 {"action_scale", c.policy.action_scale},
                 {"feature_schema", c.policy.feature_schema}};
  j["output_init_scale"] = c.output_init_scale;
  j["position_scale"] = c.position_scale;
  j["adam"] = {{"learning_rate", c.adam.learning_rate},
               {"beta1", c.adam.beta1},
               {"beta2", c.adam.beta2},
               {"epsilon", c.adam.epsilon}};
  return j;
}

TrainerConfig trainer_from(const Json& j, const std::string& path) {
  TrainerConfig c;
  Reader r(j, path);
  r.allow({"max_episode_steps", "warm_start_demos", "warm_start_epochs", "warm_start_max_attempts", "use_warm_start",
           "keep_warm_start_in_buffer", "training_episodes", "grad_steps_per_episode", "batch_size", "eval_episodes",
           "eval_stochastic", "bc_grad_steps", "mode", "feedback", "policy", "output_init_scale", "position_scale",
           "adam"});
  r.read("max_episode_steps", c.max_episode_steps);
  r.read("warm_start_demos", c.warm_start_demos);
  r.read("warm_start_epochs", c.warm_start_epochs);
  r.read("warm_start_max_attempts", c.warm_start_max_attempts);
  r.read("use_warm_start", c.use_warm_start);
  r.read("keep_warm_start_in_buffer", c.keep_warm_start_in_buffer);
  r.read("training_episodes", c.training_episodes);
  r.read("grad_steps_per_episode", c.grad_steps_per_episode);
  r.read("batch_size", c.batch_size);
  r.read("eval_episodes", c.eval_episodes);
  r.read("eval_stochastic", c.eval_stochastic);
  r.read("bc_grad_steps", c.bc_grad_steps);
  std::string mode = to_string(c.mode);
  r.read("mode", mode);
  c.mode = rethrow_as_parse(r.at("mode"), [&] { return train_mode_from_string(mode); });
  if (r.has("feedback")) {
    Reader f(r.raw("feedback"), r.at("feedback"));
    f.allow({"beta_deg", "epsilon_zero", "mode"});
    f.read("beta_deg", c.feedback.beta_deg);
    f.read("epsilon_zero", c.feedback.epsilon_zero);
    std::string fm = to_string(c.feedback.mode);
    f.read("mode", fm);
    c.feedback.mode = rethrow_as_parse(f.at("mode"), [&] { return feedback_mode_from_string(fm); });
  }
  if (r.has("policy")) {
    Reader p(r.raw("policy"), r.at("policy"));
    p.allow({"hidden", "sigma", "action_scale", "feature_schema"});
    std::vector<std::size_t> hidden;
    for (std::size_t i = 1; i + 1 < c.policy.layers.size(); ++i) hidden.push_back(c.policy.layers[i]);
    p.read_list("hidden", hidden, [](const Json& v, const std::string& at) {
      if (!v.is_number_integer() || v.get<long long>() <= 0) throw ParseError(at, "expected a positive integer");
      return v.get<std::size_t>();
    });
    c.policy.layers = {kFeatureDim};
    c.policy.layers.insert(c.policy.layers.end(), hidden.begin(), hidden.end());
    c.policy.layers.push_back(4);
    p.read("sigma", c.policy.sigma);
    p.read("action_scale", c.policy.action_scale);
    p.read("feature_schema", c.policy.feature_schema);
  }
  r.read("output_init_scale", c.output_init_scale);
  r.read("position_scale", c.position_scale);
  if (r.has("adam")) {
    Reader a(r.raw("adam"), r.at("adam"));
    a.allow({"learning_rate", "beta1", "beta2", "epsilon"});
    a.read("learning_rate", c.adam.learning_rate);
    a.read("beta1", c.adam.beta1);
    a.read("beta2", c.adam.beta2);
    a.read("epsilon", c.adam.epsilon);
  }
  rethrow_as_parse(path, [&] {
    c.validate();
    return 0;
  });
  return c;
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::BC: return "bc";
    case Method::ITeach: return "iteach";
    case Method::TeacherDirect: return "teacher-direct";
    case Method::WarmStartOnly: return "warm-start-only";
  }
  return "iteach";
}

Method method_from_string(const std::string& s) {
  if (s == "bc") return Method::BC;
  if (s == "iteach") return Method::ITeach;
  if (s == "teacher-direct") return Method::TeacherDirect;
  if (s == "warm-start-only") return Method::WarmStartOnly;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + s + "' (bc, iteach, teacher-direct, warm-start-only)");
}

std::string trainer_config_to_json(const TrainerConfig& cfg) { return trainer_json(cfg).dump(2) + "\n"; }

TrainerConfig trainer_config_from_json(const std::string& text) { return trainer_from(dsl::parse_json_text(text), ""); }

void ExperimentConfig::validate() const {
  if (tasks.empty()) throw Error(ErrorCode::InvalidArgument, "experiment: no tasks");
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "experiment: no methods");
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "experiment: no seeds");
  if (episodes.empty()) throw Error(ErrorCode::InvalidArgument, "experiment: no episode budgets");
  for (auto e : episodes)
    if (e == 0) throw Error(ErrorCode::InvalidArgument, "experiment: episode budgets must be positive");
  for (const auto& t : tasks) find_builtin_task(t);
  for (double b : betas)
    if (!(b >= 0.0 && b <= 180.0)) throw Error(ErrorCode::InvalidArgument, "experiment: betas must lie in [0, 180]");
  if (output_dir.empty()) throw Error(ErrorCode::InvalidArgument, "experiment: output_dir is empty");
  if (workers == 0) throw Error(ErrorCode::InvalidArgument, "experiment: workers must be positive");
  trainer.validate();
  if (!scripted) llm.validate();
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  Json j;
  j["tasks"] = c.tasks;
  Json methods = Json::array();
  for (auto m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["episodes"] = c.episodes;
  j["seeds"] = c.seeds;
  j["betas"] = c.betas;
  Json modes = Json::array();
  for (auto m : c.feedback_modes) modes.push_back(to_string(m));
  j["feedback_modes"] = modes;
  j["warm_start"] = c.warm_start;
  j["trainer"] = trainer_json(c.trainer);
  j["scripted"] = c.scripted;
  j["llm"] = {{"base_url", c.llm.base_url},     {"model", c.llm.model},
              {"temperature", c.llm.temperature}, {"max_retries", c.llm.max_retries},
              {"timeout_seconds", c.llm.timeout_seconds}, {"auth_env", c.llm.auth_env},
              {"cache_dir", c.llm.cache_dir},     {"offline", c.llm.offline}};
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["log_steps"] = c.log_steps;
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  const Json j = dsl::parse_json_text(text);
  ExperimentConfig c;
  Reader r(j, "");
  r.allow({"tasks", "methods", "episodes", "seeds", "betas", "feedback_modes", "warm_start", "trainer", "scripted", "llm",
           "output_dir", "workers", "log_steps"});
  const auto str = [](const Json& v, const std::string& at) {
    if (!v.is_string()) throw ParseError(at, "expected a string");
    return v.get<std::string>();
  };
  const auto count = [](const Json& v, const std::string& at) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ParseError(at, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  };
  r.read_list("tasks", c.tasks, [&](const Json& v, const std::string& at) {
    const std::string name = str(v, at);
    rethrow_as_parse(at, [&] { return find_builtin_task(name); });
    return name;
  });
  r.read_list("methods", c.methods, [&](const Json& v, const std::string& at) {
    const std::string s = str(v, at);
    return rethrow_as_parse(at, [&] { return method_from_string(s); });
  });
  r.read_list("episodes", c.episodes,
              [&](const Json& v, const std::string& at) { return static_cast<std::size_t>(count(v, at)); });
  r.read_list("seeds", c.seeds, count);
  r.read_list("betas", c.betas, [](const Json& v, const std::string& at) {
    if (!v.is_number()) throw ParseError(at, "expected a number");
    return v.get<double>();
  });
  r.read_list("feedback_modes", c.feedback_modes, [&](const Json& v, const std::string& at) {
    const std::string s = str(v, at);
    return rethrow_as_parse(at, [&] { return feedback_mode_from_string(s); });
  });
  r.read_list("warm_start", c.warm_start, [](const Json& v, const std::string& at) {
    if (!v.is_boolean()) throw ParseError(at, "expected true or false");
    return v.get<bool>();
  });
  if (r.has("trainer")) c.trainer = trainer_from(r.raw("trainer"), "trainer");
  r.read("scripted", c.scripted);
  if (r.has("llm")) {
    Reader l(r.raw("llm"), "llm");
    l.allow({"base_url", "model", "temperature", "max_retries", "timeout_seconds", "auth_env", "cache_dir", "offline"});
    l.read("base_url", c.llm.base_url);
    l.read("model", c.llm.model);
    l.read("temperature", c.llm.temperature);
    l.read("max_retries", c.llm.max_retries);
    l.read("timeout_seconds", c.llm.timeout_seconds);
    l.read("auth_env", c.llm.auth_env);
    l.read("cache_dir", c.llm.cache_dir);
    l.read("offline", c.llm.offline);
  }
  r.read("output_dir", c.output_dir);
  r.read("workers", c.workers);
  r.read("log_steps", c.log_steps);
  rethrow_as_parse("", [&] {
    c.validate();
    return 0;
  });
  return c;
}

}  // namespace iteach
