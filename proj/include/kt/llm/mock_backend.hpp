#pragma once

#include <array>
#include <cstdint>

#include "kt/llm/backend.hpp"
#include "kt/llm/prompts.hpp"

namespace kt::llm {

struct MockConfig {
  enum class Accept { kAny, kMinimalOnly, kExtendedOnly };

  /// Weights on [B, C, D, E]; D and E read as 0 for minimal prompts.
  std::array<double, 4> weights{0.0, 0.0, 0.0, 0.0};
  Accept accept = Accept::kAny;
  /// Fraction of requests answered with unparseable text and no logprobs,
  /// chosen deterministically from the seed and the request.
  double garbage_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Deterministic stand-in for a fine-tuned completion model and a chat
/// model. It parses the counters back out of the prompt and answers with
/// p = sigmoid(w . [B, C, D, E]) as first-token logprobs {"C": ln p,
/// "W": ln(1 - p)}; chat answers CORRECT iff p >= 0.5.
class MockBackend final : public LlmBackend {
 public:
  explicit MockBackend(MockConfig config);

  Capabilities capabilities() const override { return {true, true}; }
  Json post(Endpoint endpoint, const Json& body) override;

  /// Closed form the backend answers with; throws BackendError for a prompt
  /// that does not match an accepted template.
  double probability(const std::string& prompt) const;

 private:
  bool garbage(const std::string& prompt) const;

  MockConfig config_;
};

}  // namespace kt::llm
