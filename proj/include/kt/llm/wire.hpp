#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "kt/llm/backend.hpp"
#include "kt/llm/prompts.hpp"

namespace kt::llm {

struct CompletionParams {
  std::string model;
  int max_tokens = 1;
  /// Number of top alternatives requested per token.
  int logprobs = 5;
  double temperature = 0.0;
};

Json make_completion_request(const std::string& prompt, const CompletionParams& params);
Json make_chat_request(const ChatRequest& request, const CompletionParams& params);

struct CompletionResult {
  std::string text;
  /// Top alternatives of the first generated token, when returned.
  std::optional<TokenLogprobs> first_token_logprobs;
};

/// Reads choices[0].text and choices[0].logprobs.top_logprobs[0]. Throws
/// BackendError on a malformed body.
CompletionResult parse_completion_response(const Json& body);

/// Reads choices[0].message.content.
std::string parse_chat_response(const Json& body);

Json make_completion_response(const std::string& text, const TokenLogprobs& top_logprobs);
Json make_chat_response(const std::string& content);

/// Canonical text of a request: compact JSON with sorted keys.
std::string canonical_request(Endpoint endpoint, const Json& body);
std::uint64_t request_hash(Endpoint endpoint, const Json& body);

}  // namespace kt::llm
