#pragma once

#include <string>
#include <vector>

#include "kt/llm/backend.hpp"

namespace kt::llm {

struct HttpConfig {
  /// scheme://host[:port]; paths /v1/completions and /v1/chat/completions
  /// are appended.
  std::string base_url;
  /// Environment variables searched in order for the bearer token. No
  /// Authorization header is sent when none is set.
  std::vector<std::string> api_key_env{"KT_LLM_API_KEY", "OPENAI_API_KEY"};
  int timeout_seconds = 60;
  Capabilities capabilities{true, true};
};

/// OpenAI-compatible HTTP client. Neither the endpoint nor the credential
/// appears in errors or logs.
class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(HttpConfig config);

  Capabilities capabilities() const override { return config_.capabilities; }
  Json post(Endpoint endpoint, const Json& body) override;

 private:
  HttpConfig config_;
  std::string api_key_;
};

}  // namespace kt::llm
