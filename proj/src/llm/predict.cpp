#include "kt/llm/predict.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace kt::llm {
namespace {

LlmOutcome from_text(const std::string& text, double confidence) {
  const auto parsed = parse_completion(text);
  if (const auto* failure = std::get_if<ParseFailure>(&parsed)) {
    return {std::nullopt, "unparseable completion '" + failure->raw.substr(0, 80) + "'"};
  }
  const double p = std::get<Label>(parsed) == Label::kCorrect ? confidence : 1.0 - confidence;
  return {make_prediction(p), {}};
}

}  // namespace

LlmOutcome predict_llm(LlmBackend& backend, const LlmPredictConfig& config,
                       const HistoryFeatures& f) {
  const Endpoint endpoint = config.mode == LlmMode::kFinetunedCompletion
                                ? Endpoint::kCompletions
                                : Endpoint::kChatCompletions;
  if (!backend.capabilities().supports(endpoint)) {
    throw BackendError(std::string("backend does not support ") + endpoint_path(endpoint));
  }
  if (config.mode == LlmMode::kZeroShotChat) {
    const auto request = build_zero_shot_request(f, config.prompt_options);
    const auto response = post_with_retries(backend, endpoint,
                                            make_chat_request(request, config.params), config.retry);
    return from_text(parse_chat_response(response), config.surrogate_confidence);
  }
  const auto prompt = render_prompt(config.prompt_template, f, config.prompt_options);
  const auto response = post_with_retries(
      backend, endpoint, make_completion_request(prompt, config.params), config.retry);
  const auto result = parse_completion_response(response);
  if (!result.first_token_logprobs || result.first_token_logprobs->empty()) {
    return from_text(result.text, config.surrogate_confidence);
  }
  const auto p = normalize_logprobs(*result.first_token_logprobs);
  if (!p) return {std::nullopt, "no CORRECT or WRONG prefix among returned logprobs"};
  return {make_prediction(*p), {}};
}

std::vector<LlmOutcome> predict_llm_batch(LlmBackend& backend, const LlmPredictConfig& config,
                                          std::span<const HistoryFeatures> points) {
  std::vector<LlmOutcome> out(points.size());
  const std::size_t workers = std::min(std::max<std::size_t>(1, config.max_in_flight), points.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = predict_llm(backend, config, points[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= points.size()) return;
        try {
          out[i] = predict_llm(backend, config, points[i]);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          stop = true;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace kt::llm
