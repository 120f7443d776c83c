#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>

#include "json.hpp"
#include "kt/error.hpp"

namespace kt::llm {

using Json = nlohmann::json;

enum class Endpoint { kCompletions, kChatCompletions };

/// "/v1/completions" or "/v1/chat/completions".
const char* endpoint_path(Endpoint e);

struct Capabilities {
  bool completion_logprobs = false;
  bool chat = false;

  bool supports(Endpoint e) const {
    return e == Endpoint::kCompletions ? completion_logprobs : chat;
  }
};

/// A request that cannot succeed as issued (bad request, missing replay
/// record, malformed response). Not retried.
class BackendError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// A failure that may succeed on retry (connection, timeout, 429, 5xx).
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Completion API speaking OpenAI-compatible JSON bodies. Implementations
/// must tolerate concurrent post() calls.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual Capabilities capabilities() const = 0;
  virtual Json post(Endpoint endpoint, const Json& body) = 0;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

/// Issues the request, retrying TransportError with exponential backoff.
/// `sleep` defaults to std::this_thread::sleep_for.
Json post_with_retries(LlmBackend& backend, Endpoint endpoint, const Json& body,
                       const RetryPolicy& policy,
                       const std::function<void(std::chrono::milliseconds)>& sleep = {});

}  // namespace kt::llm
