#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "ironia/error.hpp"
#include "ironia/llm.hpp"

namespace ironia {

struct RemoteClientConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_seconds = 120;
};

/// Chat-completion client: one user message per request, temperature from
/// the request, a single choice.
class RemoteClient final : public LlmClient {
 public:
  explicit RemoteClient(RemoteClientConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::ConfigError, "credential variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
    // Split "scheme://host[:port]/prefix" into origin and path prefix.
    const auto scheme_end = config_.base_url.find("://");
    const auto path_start =
        config_.base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    origin_ = config_.base_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  std::string complete(const CompletionRequest& request) override {
    nlohmann::json body = {
        {"model", config_.model},
        {"temperature", request.temperature},
        {"n", 1},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})}};
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::BackendError, "request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::BackendError, "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::BackendError, "malformed completion body");
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::BackendError, "completion body without choices[0].message.content");
    }
  }

  std::string model_id() const override { return config_.model; }

 private:
  RemoteClientConfig config_;
  std::string api_key_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace ironia
