#include "httplib.h"

#include <cstdlib>

#include "json.hpp"

#include "iteach/llmgen.hpp"

namespace iteach {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

Url split_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidArgument, "endpoint URL lacks a scheme: " + url);
  const std::size_t slash = url.find('/', scheme + 3);
  Url u{url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
  while (!u.path.empty() && u.path.back() == '/') u.path.pop_back();
  return u;
}

}  // namespace

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages, const LlmEndpointConfig& cfg) {
  const Url url = split_url(cfg.base_url);
  httplib::Client cli(url.origin);
  const auto secs = static_cast<time_t>(cfg.timeout_seconds);
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  cli.set_write_timeout(secs, 0);

  httplib::Headers headers;
  if (!cfg.auth_env.empty()) {
    const char* token = std::getenv(cfg.auth_env.c_str());
    if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  body["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = cfg.temperature;

  auto res = cli.Post(url.path + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::Transport, "request to " + cfg.base_url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::Transport, "endpoint returned HTTP " + std::to_string(res->status));
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Transport, std::string("malformed completion response: ") + e.what());
  }
}

}  // namespace iteach
