#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kt/features.hpp"
#include "kt/types.hpp"

namespace kt::llm {

enum class PromptTemplate { kMinimal, kExtended };

const char* template_name(PromptTemplate t);
/// Accepts "minimal" or "extended"; throws ConfigError otherwise.
PromptTemplate parse_template_name(std::string_view name);

struct PromptOptions {
  /// Digit-split question and skill ids as well as the counters.
  bool split_ids = true;
};

/// Decimal digits of n joined by single spaces: 342 -> "3 4 2".
std::string space_digits(std::uint64_t n);

/// Inverse of space_digits on its image; also accepts unspaced digits.
std::optional<std::uint64_t> unspace_digits(std::string_view text);

std::string render_minimal_prompt(const HistoryFeatures& f, const PromptOptions& options = {});
std::string render_extended_prompt(const HistoryFeatures& f, const PromptOptions& options = {});
std::string render_prompt(PromptTemplate t, const HistoryFeatures& f,
                          const PromptOptions& options = {});

/// Numeric fields recovered from a rendered prompt. Skill fields are zero
/// for minimal prompts.
struct ParsedPrompt {
  PromptTemplate kind = PromptTemplate::kMinimal;
  std::uint64_t question_id = 0;
  std::uint64_t total_correct = 0;
  std::uint64_t total_wrong = 0;
  std::uint64_t skill_id = 0;
  std::uint64_t skill_correct = 0;
  std::uint64_t skill_wrong = 0;
};

/// nullopt when the text matches neither template exactly.
std::optional<ParsedPrompt> parse_prompt(std::string_view prompt);

extern const char* const kZeroShotSystemMessage;

struct ChatRequest {
  std::string system_message;
  std::string user_message;
};

ChatRequest build_zero_shot_request(const HistoryFeatures& f, const PromptOptions& options = {});

struct PromptExample {
  std::string prompt;
  Label completion = Label::kWrong;

  friend bool operator==(const PromptExample&, const PromptExample&) = default;
};

/// One JSON object per line with fields "prompt" and "completion", in
/// sequence then position order. Returns the number of records written.
std::size_t export_finetune_corpus(const Dataset& train, PromptTemplate t, std::ostream& sink,
                                   const PromptOptions& options = {});

std::vector<PromptExample> read_finetune_corpus(std::istream& in);

struct ParseFailure {
  std::string raw;
};

/// Trim, uppercase, exact match against CORRECT / WRONG.
std::variant<Label, ParseFailure> parse_completion(std::string_view raw);

using TokenLogprobs = std::map<std::string, double>;

/// p_C / (p_C + p_W) where p_C sums exp(logprob) over tokens that, trimmed
/// and uppercased, are non-empty prefixes of "CORRECT" (likewise p_W for
/// "WRONG"). nullopt when neither word has any mass.
std::optional<double> normalize_logprobs(const TokenLogprobs& logprobs);

}  // namespace kt::llm
