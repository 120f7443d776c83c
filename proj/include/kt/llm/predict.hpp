#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kt/features.hpp"
#include "kt/llm/backend.hpp"
#include "kt/llm/prompts.hpp"
#include "kt/llm/wire.hpp"
#include "kt/types.hpp"

namespace kt::llm {

enum class LlmMode { kFinetunedCompletion, kZeroShotChat };

/// p_correct assigned to a bare CORRECT answer when no logprobs are
/// available; WRONG gets 1 - this.
inline constexpr double kSurrogateConfidence = 0.75;

struct LlmPredictConfig {
  LlmMode mode = LlmMode::kFinetunedCompletion;
  /// Prompt of the fine-tuned model; zero-shot always uses minimal.
  PromptTemplate prompt_template = PromptTemplate::kMinimal;
  PromptOptions prompt_options;
  CompletionParams params;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  double surrogate_confidence = kSurrogateConfidence;
};

/// A prediction, or the reason the point could not be scored.
struct LlmOutcome {
  std::optional<Prediction> prediction;
  std::string failure;
};

/// Throws BackendError if the backend lacks the mode's capability or the
/// request still fails after retries; parse failures and logprobs without
/// signal come back as failed outcomes.
LlmOutcome predict_llm(LlmBackend& backend, const LlmPredictConfig& config,
                       const HistoryFeatures& f);

/// predict_llm over many points with at most max_in_flight concurrent
/// requests; results keep input order.
std::vector<LlmOutcome> predict_llm_batch(LlmBackend& backend, const LlmPredictConfig& config,
                                          std::span<const HistoryFeatures> points);

}  // namespace kt::llm
