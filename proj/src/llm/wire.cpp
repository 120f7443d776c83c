#include "kt/llm/wire.hpp"

#include <cmath>
#include <thread>

#include "kt/hash.hpp"

namespace kt::llm {

const char* endpoint_path(Endpoint e) {
  return e == Endpoint::kCompletions ? "/v1/completions" : "/v1/chat/completions";
}

Json post_with_retries(LlmBackend& backend, Endpoint endpoint, const Json& body,
                       const RetryPolicy& policy,
                       const std::function<void(std::chrono::milliseconds)>& sleep) {
  const int attempts = std::max(1, policy.attempts);
  auto backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return backend.post(endpoint, body);
    } catch (const TransportError& e) {
      if (attempt >= attempts) {
        throw TransportError("request failed after " + std::to_string(attempts) +
                             " attempts: " + e.what());
      }
    }
    if (sleep) sleep(backoff);
    else std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(
        static_cast<long long>(std::llround(static_cast<double>(backoff.count()) * policy.multiplier)));
  }
}

Json make_completion_request(const std::string& prompt, const CompletionParams& params) {
  Json body;
  body["model"] = params.model;
  body["prompt"] = prompt;
  body["max_tokens"] = params.max_tokens;
  body["logprobs"] = params.logprobs;
  body["temperature"] = params.temperature;
  return body;
}

Json make_chat_request(const ChatRequest& request, const CompletionParams& params) {
  Json body;
  body["model"] = params.model;
  body["messages"] = Json::array({
      {{"role", "system"}, {"content", request.system_message}},
      {{"role", "user"}, {"content", request.user_message}},
  });
  body["max_tokens"] = params.max_tokens;
  body["temperature"] = params.temperature;
  return body;
}

CompletionResult parse_completion_response(const Json& body) {
  try {
    const auto& choice = body.at("choices").at(0);
    CompletionResult out;
    out.text = choice.at("text").get<std::string>();
    if (choice.contains("logprobs") && !choice["logprobs"].is_null()) {
      const auto& top = choice["logprobs"].at("top_logprobs");
      if (!top.empty() && !top.at(0).is_null()) {
        TokenLogprobs lp;
        for (const auto& [token, value] : top.at(0).items()) lp[token] = value.get<double>();
        out.first_token_logprobs = std::move(lp);
      }
    }
    return out;
  } catch (const Json::exception& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
}

std::string parse_chat_response(const Json& body) {
  try {
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    throw BackendError(std::string("malformed chat response: ") + e.what());
  }
}

Json make_completion_response(const std::string& text, const TokenLogprobs& top_logprobs) {
  Json top = Json::object();
  std::string best;
  double best_lp = -INFINITY;
  for (const auto& [token, lp] : top_logprobs) {
    top[token] = lp;
    if (lp > best_lp) {
      best = token;
      best_lp = lp;
    }
  }
  Json logprobs;
  logprobs["tokens"] = Json::array({best});
  logprobs["token_logprobs"] = Json::array({best_lp});
  logprobs["top_logprobs"] = Json::array({top});
  Json choice;
  choice["index"] = 0;
  choice["text"] = text;
  choice["logprobs"] = logprobs;
  choice["finish_reason"] = "length";
  Json body;
  body["object"] = "text_completion";
  body["choices"] = Json::array({choice});
  return body;
}

Json make_chat_response(const std::string& content) {
  Json choice;
  choice["index"] = 0;
  choice["message"] = {{"role", "assistant"}, {"content", content}};
  choice["finish_reason"] = "stop";
  Json body;
  body["object"] = "chat.completion";
  body["choices"] = Json::array({choice});
  return body;
}

std::string canonical_request(Endpoint endpoint, const Json& body) {
  Json j;
  j["endpoint"] = endpoint_path(endpoint);
  j["body"] = body;
  return j.dump();
}

std::uint64_t request_hash(Endpoint endpoint, const Json& body) {
  return fnv1a64(canonical_request(endpoint, body));
}

}  // namespace kt::llm
