#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kt {

/// Dense index into Dataset::item_vocab.
using ItemId = std::uint32_t;
/// Dense index into Dataset::skill_vocab.
using SkillId = std::uint32_t;

enum class Label : std::uint8_t { kWrong = 0, kCorrect = 1 };

inline const char* label_name(Label label) {
  return label == Label::kCorrect ? "CORRECT" : "WRONG";
}

/// Probability of a correct response, binarized by the shared rule
/// (CORRECT iff p >= 0.5).
struct Prediction {
  double p_correct = 0.5;
  Label label = Label::kCorrect;

  /// Confidence of the emitted label, max(p, 1 - p).
  double label_probability() const { return p_correct >= 0.5 ? p_correct : 1.0 - p_correct; }
};

inline constexpr double kDecisionThreshold = 0.5;

inline Label binarize(double p_correct) {
  return p_correct >= kDecisionThreshold ? Label::kCorrect : Label::kWrong;
}

inline Prediction make_prediction(double p_correct) { return {p_correct, binarize(p_correct)}; }

/// One graded response. The owning user is the enclosing StudentSequence.
struct InteractionRecord {
  ItemId item = 0;
  SkillId skill = 0;
  std::uint8_t correct = 0;
  std::uint32_t position = 0;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct StudentSequence {
  std::string user_id;
  std::vector<InteractionRecord> records;

  std::size_t size() const { return records.size(); }
};

/// A set of student sequences with dense item/skill id spaces.
///
/// item_vocab[i] and skill_vocab[k] hold the source identifiers for dense
/// ids i and k. Vocabularies are never shrunk by filtering or splitting, so
/// dense ids stay stable across every dataset derived from one ingestion.
struct Dataset {
  std::string name;
  std::vector<StudentSequence> sequences;
  std::vector<std::string> item_vocab;
  std::vector<std::string> skill_vocab;
  /// Rows skipped at load time (empty skill with drop_missing_skill).
  std::size_t dropped_rows = 0;

  std::size_t num_items() const { return item_vocab.size(); }
  std::size_t num_skills() const { return skill_vocab.size(); }
  std::size_t num_interactions() const;

  /// Same vocabularies and name, no sequences.
  Dataset empty_like() const { return Dataset{name, {}, item_vocab, skill_vocab}; }
};

inline std::size_t Dataset::num_interactions() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.records.size();
  return n;
}

}  // namespace kt
