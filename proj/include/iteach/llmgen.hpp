#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iteach/codepolicy.hpp"
#include "iteach/error.hpp"
#include "iteach/simenv.hpp"

namespace iteach {

enum class PromptRole { Planner, Action, Check };

const char* to_string(PromptRole r);

struct Exemplar {
  std::string input;
  std::string output;
};

struct PromptTemplate {
  PromptRole role = PromptRole::Planner;
  std::string version;
  std::string system;
  std::vector<Exemplar> exemplars;
  // "{input}" is replaced by the rendered request.
  std::string user_slot = "{input}";

  std::string render_user(const std::string& input) const;
  // At least two exemplars, each output parsing under this role's grammar.
  void validate() const;
};

struct PromptTemplates {
  PromptTemplate planner;
  PromptTemplate action;
  PromptTemplate check;

  static const PromptTemplates& builtin();
  void validate() const;
};

struct LlmEndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model = "llama3-70b-instruct";
  double temperature = 0.0;
  int max_retries = 3;
  double timeout_seconds = 120.0;
  // Name of the environment variable holding the bearer token; unset or empty
  // variable means no Authorization header.
  std::string auth_env = "ITEACH_LLM_API_KEY";
  std::string cache_dir;  // empty disables the cache
  bool offline = false;

  void validate() const;
};

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the assistant text. Throws Error(Transport) on network or
  // protocol failure.
  virtual std::string complete(const std::vector<ChatMessage>& messages, const LlmEndpointConfig& cfg) = 0;
};

// POST {base_url}/chat/completions, OpenAI-style wire format.
class HttpChatClient : public ChatClient {
 public:
  std::string complete(const std::vector<ChatMessage>& messages, const LlmEndpointConfig& cfg) override;
};

// Hands out canned responses in order; Transport error once exhausted.
class ReplayChatClient : public ChatClient {
 public:
  explicit ReplayChatClient(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  std::string complete(const std::vector<ChatMessage>& messages, const LlmEndpointConfig& cfg) override;
  std::size_t calls() const noexcept { return next_; }
  const std::vector<std::vector<ChatMessage>>& requests() const noexcept { return requests_; }

 private:
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
  std::vector<std::vector<ChatMessage>> requests_;
};

struct Exchange {
  PromptRole role = PromptRole::Planner;
  std::vector<ChatMessage> messages;
  std::string response;
  std::string error;  // validation error that triggered a retry, if any
};

struct GenerationRecord {
  std::string task;
  std::string model;
  std::string content_hash;
  std::vector<Exchange> transcript;
  std::optional<CodePolicyProgram> program;
  std::string failure;
};

std::string record_to_json(const GenerationRecord& r);
GenerationRecord record_from_json(const std::string& text);

// Carries the transcript gathered up to the failure.
class GenerationError : public Error {
 public:
  GenerationError(ErrorCode code, const std::string& message, GenerationRecord record)
      : Error(code, message), record_(std::move(record)) {}
  const GenerationRecord& record() const noexcept { return record_; }

 private:
  GenerationRecord record_;
};

// Hex SHA-256 over instruction, objects, template versions and model id.
std::string generation_cache_key(const TaskSpec& task, const LlmEndpointConfig& cfg, const PromptTemplates& templates);

// "1. foo\n2. bar" -> {"foo", "bar"}. Throws ParseError when no numbered
// items are found or the numbering is not 1..n.
std::vector<std::string> parse_numbered_list(const std::string& text);

std::string describe_task(const TaskSpec& task);

std::vector<std::string> generate_plan(const TaskSpec& task, const LlmEndpointConfig& cfg,
                                       const PromptTemplates& templates, ChatClient& client,
                                       GenerationRecord& record);

PlanStep generate_step(const std::string& description, const std::vector<std::string>& plan, const TaskSpec& task,
                       const LlmEndpointConfig& cfg, const PromptTemplates& templates, ChatClient& client,
                       GenerationRecord& record);

// Full chain with caching. A cache hit makes no client calls. Offline with a
// cold cache throws Error(Transport).
GenerationRecord generate_codepolicy(const TaskSpec& task, const LlmEndpointConfig& cfg,
                                     const PromptTemplates& templates, ChatClient& client);

}  // namespace iteach
