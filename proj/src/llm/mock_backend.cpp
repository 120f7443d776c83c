#include "kt/llm/mock_backend.hpp"

#include <algorithm>
#include <cmath>

#include "kt/hash.hpp"
#include "kt/llm/wire.hpp"

namespace kt::llm {

MockBackend::MockBackend(MockConfig config) : config_(config) {
  if (!(config_.garbage_rate >= 0.0 && config_.garbage_rate <= 1.0)) {
    throw ConfigError("mock garbage_rate must lie in [0, 1]");
  }
}

double MockBackend::probability(const std::string& prompt) const {
  const auto parsed = parse_prompt(prompt);
  if (!parsed) throw BackendError("mock backend: malformed prompt (matches no template)");
  using A = MockConfig::Accept;
  if ((config_.accept == A::kMinimalOnly && parsed->kind != PromptTemplate::kMinimal) ||
      (config_.accept == A::kExtendedOnly && parsed->kind != PromptTemplate::kExtended)) {
    throw BackendError(std::string("mock backend: malformed prompt (unexpected ") +
                       template_name(parsed->kind) + " template)");
  }
  const auto& w = config_.weights;
  const double z = w[0] * static_cast<double>(parsed->total_correct) +
                   w[1] * static_cast<double>(parsed->total_wrong) +
                   w[2] * static_cast<double>(parsed->skill_correct) +
                   w[3] * static_cast<double>(parsed->skill_wrong);
  return std::clamp(1.0 / (1.0 + std::exp(-z)), 1e-12, 1.0 - 1e-12);
}

bool MockBackend::garbage(const std::string& prompt) const {
  if (config_.garbage_rate <= 0.0) return false;
  const std::uint64_t h = fnv1a64(hex64(config_.seed) + prompt);
  return static_cast<double>(h >> 11) * 0x1.0p-53 < config_.garbage_rate;
}

Json MockBackend::post(Endpoint endpoint, const Json& body) {
  try {
    if (endpoint == Endpoint::kCompletions) {
      const auto prompt = body.at("prompt").get<std::string>();
      const double p = probability(prompt);
      if (garbage(prompt)) return make_completion_response("maybe", {{"the", -0.05}});
      return make_completion_response(p >= 0.5 ? "CORRECT" : "WRONG",
                                      {{"C", std::log(p)}, {"W", std::log1p(-p)}});
    }
    const auto& messages = body.at("messages");
    if (messages.size() != 2 || messages.at(0).at("content") != kZeroShotSystemMessage) {
      throw BackendError("mock backend: chat request lacks the zero-shot system message");
    }
    const auto user = messages.at(1).at("content").get<std::string>();
    const double p = probability(user);
    if (garbage(user)) return make_chat_response("It depends on the student.");
    return make_chat_response(p >= 0.5 ? "CORRECT" : "WRONG");
  } catch (const Json::exception& e) {
    throw BackendError(std::string("mock backend: malformed request: ") + e.what());
  }
}

}  // namespace kt::llm
