#include "iteach/llmgen.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "codepolicy/dsl_json.hpp"
#include "util/atomic_file.hpp"
#include "util/text.hpp"

namespace iteach {

namespace fs = std::filesystem;
using dsl::Json;

const char* to_string(PromptRole r) {
  switch (r) {
    case PromptRole::Planner: return "planner";
    case PromptRole::Action: return "action";
    case PromptRole::Check: return "check";
  }
  return "planner";
}

namespace {

PromptRole role_from_string(const std::string& s) {
  if (s == "planner") return PromptRole::Planner;
  if (s == "action") return PromptRole::Action;
  if (s == "check") return PromptRole::Check;
  throw ParseError("role", "unknown prompt role '" + s + "'");
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// The first balanced {...} in the text; tolerates code fences and chatter.
Json extract_json_object(const std::string& text) {
  const std::size_t open = text.find('{');
  if (open == std::string::npos) throw ParseError("", "no JSON object in the response");
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return dsl::parse_json_text(text.substr(open, i - open + 1));
  }
  throw ParseError("", "unterminated JSON object in the response");
}

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParseError(it.key(), "unexpected field");
  }
}

struct ActionRule {
  TargetExpr target;
  StepGripper gripper;
};

ActionRule parse_action_response(const std::string& text) {
  const Json j = extract_json_object(text);
  reject_unknown(j, {"target", "gripper"});
  if (!j.contains("target")) throw ParseError("target", "missing");
  if (!j.contains("gripper")) throw ParseError("gripper", "missing");
  return {dsl::target_from_json(j["target"], "target"), dsl::gripper_from_json(j["gripper"], "gripper")};
}

CheckExpr parse_check_response(const std::string& text) {
  const Json j = extract_json_object(text);
  reject_unknown(j, {"check"});
  if (!j.contains("check")) throw ParseError("check", "missing");
  return dsl::check_from_json(j["check"], "check");
}

std::vector<ChatMessage> base_messages(const PromptTemplate& t, const std::string& input) {
  std::vector<ChatMessage> m{{"system", t.system}};
  for (const auto& ex : t.exemplars) {
    m.push_back({"user", t.render_user(ex.input)});
    m.push_back({"assistant", ex.output});
  }
  m.push_back({"user", t.render_user(input)});
  return m;
}

// Sends the prompt, parses with `parse`, and on failure appends the error and
// asks again, up to cfg.max_retries extra attempts.
template <class Parse>
auto ask(const PromptTemplate& t, const std::string& input, const LlmEndpointConfig& cfg, ChatClient& client,
         GenerationRecord& record, Parse parse) -> decltype(parse(std::string())) {
  std::vector<ChatMessage> messages = base_messages(t, input);
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    Exchange ex;
    ex.role = t.role;
    ex.messages = messages;
    try {
      ex.response = client.complete(messages, cfg);
    } catch (const Error& e) {
      ex.error = e.what();
      record.transcript.push_back(std::move(ex));
      record.failure = e.what();
      throw GenerationError(ErrorCode::Transport, std::string("transport error: ") + e.what(), record);
    }
    try {
      auto value = parse(ex.response);
      record.transcript.push_back(std::move(ex));
      return value;
    } catch (const Error& e) {
      last_error = e.what();
      ex.error = last_error;
      messages.push_back({"assistant", ex.response});
      messages.push_back({"user", "Your answer was rejected: " + last_error +
                                      "\nAnswer again, following the required format exactly."});
      record.transcript.push_back(std::move(ex));
    }
  }
  record.failure = std::string(to_string(t.role)) + " prompt failed after " + std::to_string(cfg.max_retries + 1) +
                   " attempts: " + last_error;
  throw GenerationError(ErrorCode::GenerationFailed, record.failure, record);
}

std::string step_request(const TaskSpec& task, const std::vector<std::string>& plan, const std::string& step) {
  std::ostringstream os;
  os << describe_task(task) << "\nPlan:\n";
  for (std::size_t i = 0; i < plan.size(); ++i) os << (i + 1) << ". " << plan[i] << "\n";
  os << "Current step: " << step;
  return os.str();
}

Json messages_json(const std::vector<ChatMessage>& ms) {
  Json a = Json::array();
  for (const auto& m : ms) a.push_back({{"role", m.role}, {"content", m.content}});
  return a;
}

std::vector<ChatMessage> messages_from_json(const Json& a, const std::string& path) {
  if (!a.is_array()) throw ParseError(path, "expected an array");
  std::vector<ChatMessage> out;
  for (const auto& m : a) {
    if (!m.is_object() || !m.contains("role") || !m.contains("content"))
      throw ParseError(path, "expected {role, content}");
    out.push_back({m["role"].get<std::string>(), m["content"].get<std::string>()});
  }
  return out;
}

}  // namespace

std::string PromptTemplate::render_user(const std::string& input) const {
  std::string out = user_slot;
  const std::size_t pos = out.find("{input}");
  if (pos == std::string::npos) return out + "\n" + input;
  return out.replace(pos, 7, input);
}

void PromptTemplate::validate() const {
  const std::string who = std::string(to_string(role)) + " template";
  if (version.empty()) throw Error(ErrorCode::InvalidArgument, who + ": empty version");
  if (exemplars.size() < 2) throw Error(ErrorCode::InvalidArgument, who + ": needs at least two exemplars");
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    try {
      switch (role) {
        case PromptRole::Planner: parse_numbered_list(exemplars[i].output); break;
        case PromptRole::Action: parse_action_response(exemplars[i].output); break;
        case PromptRole::Check: parse_check_response(exemplars[i].output); break;
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidArgument, who + ": exemplar " + std::to_string(i) + " does not parse: " + e.what());
    }
  }
}

void PromptTemplates::validate() const {
  if (planner.role != PromptRole::Planner || action.role != PromptRole::Action || check.role != PromptRole::Check)
    throw Error(ErrorCode::InvalidArgument, "templates: roles out of place");
  planner.validate();
  action.validate();
  check.validate();
}

void LlmEndpointConfig::validate() const {
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "llm: temperature must be >= 0");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "llm: max_retries must be >= 0");
  if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "llm: timeout must be positive");
  if (model.empty()) throw Error(ErrorCode::InvalidArgument, "llm: model id is empty");
}

std::string ReplayChatClient::complete(const std::vector<ChatMessage>& messages, const LlmEndpointConfig&) {
  requests_.push_back(messages);
  if (next_ >= responses_.size()) throw Error(ErrorCode::Transport, "replay transcript exhausted");
  return responses_[next_++];
}

std::vector<std::string> parse_numbered_list(const std::string& text) {
  std::vector<std::string> items;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (i == 0 || i >= t.size() || (t[i] != '.' && t[i] != ')')) continue;
    const int n = std::atoi(t.substr(0, i).c_str());
    if (n != static_cast<int>(items.size()) + 1)
      throw ParseError("plan", "expected item " + std::to_string(items.size() + 1) + ", got " + std::to_string(n));
    const std::string body = trim(t.substr(i + 1));
    if (body.empty()) throw ParseError("plan", "item " + std::to_string(n) + " is empty");
    items.push_back(body);
  }
  if (items.empty()) throw ParseError("plan", "no numbered steps found");
  return items;
}

std::string describe_task(const TaskSpec& task) {
  std::ostringstream os;
  os << "Objects:\n";
  if (task.objects.empty()) os << "(none)\n";
  for (const auto& o : task.objects) {
    os << "- " << o.name << " (" << to_string(o.kind);
    if (o.kind == ObjectKind::Button) os << ", joint value 1 = pressed";
    if (o.kind == ObjectKind::PrismaticJoint) os << ", joint value 1 = closed";
    os << ")\n";
  }
  os << "Instruction: " << task.instruction;
  return os.str();
}

std::string generation_cache_key(const TaskSpec& task, const LlmEndpointConfig& cfg, const PromptTemplates& templates) {
  std::ostringstream os;
  os << "instruction=" << task.instruction << "\n";
  for (const auto& o : task.objects) os << "object=" << o.name << ":" << to_string(o.kind) << "\n";
  os << "templates=" << templates.planner.version << "," << templates.action.version << "," << templates.check.version
     << "\n";
  os << "model=" << cfg.model << "\n";
  return sha256_hex(os.str());
}

std::vector<std::string> generate_plan(const TaskSpec& task, const LlmEndpointConfig& cfg,
                                       const PromptTemplates& templates, ChatClient& client,
                                       GenerationRecord& record) {
  return ask(templates.planner, describe_task(task), cfg, client, record, parse_numbered_list);
}

PlanStep generate_step(const std::string& description, const std::vector<std::string>& plan, const TaskSpec& task,
                       const LlmEndpointConfig& cfg, const PromptTemplates& templates, ChatClient& client,
                       GenerationRecord& record) {
  const std::string input = step_request(task, plan, description);
  // Object names are checked inside the parse so that a bad name goes
  // through the repair loop like any other rejection.
  const auto check_names = [&](const PlanStep& s) { validate_program(CodePolicyProgram{task.name, {s}}, task); };
  const ActionRule rule = ask(templates.action, input, cfg, client, record, [&](const std::string& text) {
    ActionRule r = parse_action_response(text);
    check_names(PlanStep{description, r.target, r.gripper, CheckExpr(AlwaysFalse{})});
    return r;
  });
  CheckExpr check = ask(templates.check, input, cfg, client, record, [&](const std::string& text) {
    CheckExpr c = parse_check_response(text);
    check_names(PlanStep{description, GripperHold{}, StepGripper::Hold, c});
    return c;
  });
  return PlanStep{description, rule.target, rule.gripper, std::move(check)};
}

GenerationRecord generate_codepolicy(const TaskSpec& task, const LlmEndpointConfig& cfg,
                                     const PromptTemplates& templates, ChatClient& client) {
  cfg.validate();
  GenerationRecord record;
  record.task = task.name;
  record.model = cfg.model;
  record.content_hash = generation_cache_key(task, cfg, templates);

  fs::path cached;
  if (!cfg.cache_dir.empty()) {
    cached = fs::path(cfg.cache_dir) / (record.content_hash + ".json");
    if (fs::exists(cached)) {
      GenerationRecord hit = record_from_json(read_text_file(cached));
      if (hit.program) {
        validate_program(*hit.program, task);
        return hit;
      }
    }
  }
  if (cfg.offline)
    throw Error(ErrorCode::Transport, "offline mode and no cached generation for task " + task.name +
                                          (cfg.cache_dir.empty() ? " (no cache directory)" : ""));

  const auto persist_failure = [&](const GenerationRecord& r) {
    if (cfg.cache_dir.empty()) return;
    fs::create_directories(cfg.cache_dir);
    write_file_atomic(fs::path(cfg.cache_dir) / (r.content_hash + ".failed.json"), record_to_json(r));
  };
  try {
    const std::vector<std::string> plan = generate_plan(task, cfg, templates, client, record);
    CodePolicyProgram program{task.name, {}};
    for (const auto& step : plan)
      program.steps.push_back(generate_step(step, plan, task, cfg, templates, client, record));
    validate_program(program, task);
    record.program = std::move(program);
  } catch (const GenerationError& e) {
    persist_failure(e.record());
    throw;
  } catch (const Error& e) {
    record.failure = e.what();
    persist_failure(record);
    throw GenerationError(ErrorCode::GenerationFailed, e.what(), record);
  }
  if (!cached.empty()) {
    fs::create_directories(cfg.cache_dir);
    write_file_atomic(cached, record_to_json(record));
  }
  return record;
}

std::string record_to_json(const GenerationRecord& r) {
  Json j;
  j["format"] = "iteach-generation";
  j["task"] = r.task;
  j["model"] = r.model;
  j["content_hash"] = r.content_hash;
  Json tr = Json::array();
  for (const auto& ex : r.transcript) {
    Json e;
    e["role"] = to_string(ex.role);
    e["messages"] = messages_json(ex.messages);
    e["response"] = ex.response;
    if (!ex.error.empty()) e["error"] = ex.error;
    tr.push_back(std::move(e));
  }
  j["transcript"] = std::move(tr);
  if (r.program) j["program"] = Json::parse(serialize_program(*r.program));
  else j["program"] = nullptr;
  if (!r.failure.empty()) j["failure"] = r.failure;
  return j.dump(2) + "\n";
}

GenerationRecord record_from_json(const std::string& text) {
  const Json j = dsl::parse_json_text(text);
  if (!j.is_object() || j.value("format", "") != "iteach-generation")
    throw ParseError("format", "not a generation record");
  GenerationRecord r;
  r.task = j.value("task", "");
  r.model = j.value("model", "");
  r.content_hash = j.value("content_hash", "");
  if (j.contains("transcript")) {
    const auto& tr = j["transcript"];
    if (!tr.is_array()) throw ParseError("transcript", "expected an array");
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const std::string p = "transcript[" + std::to_string(i) + "]";
      Exchange ex;
      ex.role = role_from_string(tr[i].value("role", ""));
      ex.messages = messages_from_json(tr[i].value("messages", Json::array()), p + ".messages");
      ex.response = tr[i].value("response", "");
      ex.error = tr[i].value("error", "");
      r.transcript.push_back(std::move(ex));
    }
  }
  if (j.contains("program") && !j["program"].is_null()) r.program = parse_program(j["program"].dump());
  r.failure = j.value("failure", "");
  return r;
}

}  // namespace iteach
