#include "kt/llm/prompts.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "kt/error.hpp"

namespace kt::llm {
namespace {

constexpr std::string_view kTotalCorrect = "Total correct until now: ";
constexpr std::string_view kTotalWrong = "Total wrong until now: ";
constexpr std::string_view kQuestion = "Current question ID: ";
constexpr std::string_view kResponse = "Student response: ";
constexpr std::string_view kSkill = "Current skill ID: ";
constexpr std::string_view kSkillCorrect = "Total correct for prior questions with skill ID ";
constexpr std::string_view kSkillWrong = "Total wrong for prior questions with skill ID ";

std::string id_text(std::uint64_t id, const PromptOptions& options) {
  return options.split_ids ? space_digits(id) : std::to_string(id);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (;;) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      return lines;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
}

std::optional<std::uint64_t> field(std::string_view line, std::string_view prefix) {
  if (!line.starts_with(prefix)) return std::nullopt;
  return unspace_digits(line.substr(prefix.size()));
}

// "<prefix>{K}: {value}" with the skill id embedded in the label.
std::optional<std::pair<std::uint64_t, std::uint64_t>> skill_field(std::string_view line,
                                                                    std::string_view prefix) {
  if (!line.starts_with(prefix)) return std::nullopt;
  const auto rest = line.substr(prefix.size());
  const auto colon = rest.find(": ");
  if (colon == std::string_view::npos) return std::nullopt;
  auto k = unspace_digits(rest.substr(0, colon));
  auto v = unspace_digits(rest.substr(colon + 2));
  if (!k || !v) return std::nullopt;
  return std::make_pair(*k, *v);
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

const char* template_name(PromptTemplate t) {
  return t == PromptTemplate::kMinimal ? "minimal" : "extended";
}

PromptTemplate parse_template_name(std::string_view name) {
  if (name == "minimal") return PromptTemplate::kMinimal;
  if (name == "extended") return PromptTemplate::kExtended;
  throw ConfigError("unknown prompt template '" + std::string(name) +
                    "' (expected minimal or extended)");
}

std::string space_digits(std::uint64_t n) {
  const std::string digits = std::to_string(n);
  std::string out;
  out.reserve(digits.size() * 2);
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0) out += ' ';
    out += digits[i];
  }
  return out;
}

std::optional<std::uint64_t> unspace_digits(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::string digits;
  const bool spaced = text.find(' ') != std::string_view::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (spaced && i % 2 == 1) {
      if (c != ' ') return std::nullopt;
      continue;
    }
    if (c < '0' || c > '9') return std::nullopt;
    digits += c;
  }
  if (spaced && text.size() % 2 == 0) return std::nullopt;  // trailing space
  if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

std::string render_minimal_prompt(const HistoryFeatures& f, const PromptOptions& options) {
  std::string out;
  out += kTotalCorrect;
  out += space_digits(f.total_correct);
  out += '\n';
  out += kTotalWrong;
  out += space_digits(f.total_wrong);
  out += '\n';
  out += kQuestion;
  out += id_text(f.question_id, options);
  out += '\n';
  out += kResponse;
  return out;
}

std::string render_extended_prompt(const HistoryFeatures& f, const PromptOptions& options) {
  const std::string k = id_text(f.skill_id, options);
  std::string out;
  out += kSkill;
  out += k;
  out += '\n';
  out += kSkillCorrect;
  out += k;
  out += ": ";
  out += space_digits(f.skill_correct);
  out += '\n';
  out += kSkillWrong;
  out += k;
  out += ": ";
  out += space_digits(f.skill_wrong);
  out += '\n';
  out += render_minimal_prompt(f, options);
  return out;
}

std::string render_prompt(PromptTemplate t, const HistoryFeatures& f, const PromptOptions& options) {
  return t == PromptTemplate::kMinimal ? render_minimal_prompt(f, options)
                                       : render_extended_prompt(f, options);
}

std::optional<ParsedPrompt> parse_prompt(std::string_view prompt) {
  const auto lines = split_lines(prompt);
  ParsedPrompt out;
  std::size_t base = 0;
  if (lines.size() == 7) {
    out.kind = PromptTemplate::kExtended;
    auto k = field(lines[0], kSkill);
    auto d = skill_field(lines[1], kSkillCorrect);
    auto e = skill_field(lines[2], kSkillWrong);
    if (!k || !d || !e || d->first != *k || e->first != *k) return std::nullopt;
    out.skill_id = *k;
    out.skill_correct = d->second;
    out.skill_wrong = e->second;
    base = 3;
  } else if (lines.size() != 4) {
    return std::nullopt;
  }
  auto b = field(lines[base], kTotalCorrect);
  auto c = field(lines[base + 1], kTotalWrong);
  auto a = field(lines[base + 2], kQuestion);
  if (!a || !b || !c || lines[base + 3] != kResponse) return std::nullopt;
  out.total_correct = *b;
  out.total_wrong = *c;
  out.question_id = *a;
  return out;
}

const char* const kZeroShotSystemMessage =
    "You are an instructor and want to predict whether a student will get a question CORRECT or "
    "WRONG. The only information you have is the student's previous answers to a series of "
    "related questions. You know how many questions they got CORRECT and how many they got "
    "WRONG. Based on this information, you should make a prediction by outputting a single word: "
    "CORRECT if you think the student will answer the next question correctly, and WRONG if you "
    "think the student will answer the next question wrong. Output no other word at all, this is "
    "very important. Try to estimate the knowledge of the student before making your prediction.";

ChatRequest build_zero_shot_request(const HistoryFeatures& f, const PromptOptions& options) {
  return {kZeroShotSystemMessage, render_minimal_prompt(f, options)};
}

std::size_t export_finetune_corpus(const Dataset& train, PromptTemplate t, std::ostream& sink,
                                   const PromptOptions& options) {
  std::size_t count = 0;
  for (const auto& seq : train.sequences) {
    HistoryTracker tracker;
    for (const auto& r : seq.records) {
      nlohmann::ordered_json record;
      record["prompt"] = render_prompt(t, tracker.features(r), options);
      record["completion"] = r.correct ? "CORRECT" : "WRONG";
      sink << record.dump() << '\n';
      tracker.consume(r);
      ++count;
    }
  }
  sink.flush();
  if (!sink) throw DataError("failed writing fine-tune corpus");
  return count;
}

std::vector<PromptExample> read_finetune_corpus(std::istream& in) {
  std::vector<PromptExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto completion = j.at("completion").get<std::string>();
      if (completion != "CORRECT" && completion != "WRONG") {
        throw DataError("completion must be CORRECT or WRONG");
      }
      out.push_back({j.at("prompt").get<std::string>(),
                     completion == "CORRECT" ? Label::kCorrect : Label::kWrong});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::variant<Label, ParseFailure> parse_completion(std::string_view raw) {
  const std::string word = upper(trim(raw));
  if (word == "CORRECT") return Label::kCorrect;
  if (word == "WRONG") return Label::kWrong;
  return ParseFailure{std::string(raw)};
}

std::optional<double> normalize_logprobs(const TokenLogprobs& logprobs) {
  if (logprobs.empty()) throw std::invalid_argument("normalize_logprobs: no tokens");
  static constexpr std::string_view kCorrectWord = "CORRECT";
  static constexpr std::string_view kWrongWord = "WRONG";
  double p_correct = 0.0;
  double p_wrong = 0.0;
  for (const auto& [token, lp] : logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw std::invalid_argument("normalize_logprobs: invalid log-probability for token '" +
                                  token + "'");
    }
    const std::string t = upper(trim(token));
    if (t.empty()) continue;
    if (kCorrectWord.starts_with(t)) p_correct += std::exp(lp);
    else if (kWrongWord.starts_with(t)) p_wrong += std::exp(lp);
  }
  if (p_correct + p_wrong <= 0.0) return std::nullopt;
  return p_correct / (p_correct + p_wrong);
}

}  // namespace kt::llm
