#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kt/types.hpp"

namespace kt {

/// History counters at prediction point `position`, computed strictly over
/// earlier records.
struct HistoryFeatures {
  ItemId question_id = 0;
  SkillId skill_id = 0;
  std::uint32_t total_correct = 0;
  std::uint32_t total_wrong = 0;
  std::uint32_t skill_correct = 0;
  std::uint32_t skill_wrong = 0;
  std::uint32_t position = 0;

  friend bool operator==(const HistoryFeatures&, const HistoryFeatures&) = default;
};

/// Direct O(i) definition. Throws std::out_of_range when i >= seq.size().
HistoryFeatures history_features(const StudentSequence& seq, std::size_t i);

/// Running counters along one sequence; features() is valid for the record
/// about to be consumed.
class HistoryTracker {
 public:
  HistoryFeatures features(const InteractionRecord& next) const;
  void consume(const InteractionRecord& record);

 private:
  std::uint32_t position_ = 0;
  std::uint32_t correct_ = 0;
  std::uint32_t wrong_ = 0;
  std::unordered_map<SkillId, std::pair<std::uint32_t, std::uint32_t>> per_skill_;
};

/// All prediction points of a sequence, computed incrementally.
std::vector<HistoryFeatures> sequence_features(const StudentSequence& seq);

struct FeatureConfig {
  /// phi(x) = ln(1 + x) on the four counters; raw counts when false.
  bool log_scale = true;
  bool per_skill_counts = true;
  bool skill_onehot = true;
  bool item_onehot = false;
  std::size_t num_skills = 0;
  std::size_t num_items = 0;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Column layout: [bias, B, C, (D, E), skill one-hot..., item one-hot...].
std::size_t feature_dimension(const FeatureConfig& config);
std::string describe(const FeatureConfig& config);
FeatureConfig parse_feature_descriptor(const std::string& text);

struct FeatureVector {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::size_t dimension = 0;

  std::size_t nonzeros() const;
};

/// Throws std::out_of_range for skill (or item) ids outside the vocabulary.
FeatureVector best_lr_vector(const HistoryFeatures& f, const FeatureConfig& config);

}  // namespace kt
