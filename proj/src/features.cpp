#include "kt/features.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kt/error.hpp"

namespace kt {

HistoryFeatures history_features(const StudentSequence& seq, std::size_t i) {
  if (i >= seq.records.size()) {
    throw std::out_of_range("history position " + std::to_string(i) + " outside sequence of length " +
                            std::to_string(seq.records.size()));
  }
  const auto& next = seq.records[i];
  HistoryFeatures f;
  f.question_id = next.item;
  f.skill_id = next.skill;
  f.position = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j < i; ++j) {
    const auto& r = seq.records[j];
    (r.correct ? f.total_correct : f.total_wrong)++;
    if (r.skill == next.skill) (r.correct ? f.skill_correct : f.skill_wrong)++;
  }
  return f;
}

HistoryFeatures HistoryTracker::features(const InteractionRecord& next) const {
  HistoryFeatures f;
  f.question_id = next.item;
  f.skill_id = next.skill;
  f.position = position_;
  f.total_correct = correct_;
  f.total_wrong = wrong_;
  if (auto it = per_skill_.find(next.skill); it != per_skill_.end()) {
    f.skill_correct = it->second.first;
    f.skill_wrong = it->second.second;
  }
  return f;
}

void HistoryTracker::consume(const InteractionRecord& record) {
  auto& counts = per_skill_[record.skill];
  if (record.correct) {
    ++correct_;
    ++counts.first;
  } else {
    ++wrong_;
    ++counts.second;
  }
  ++position_;
}

std::vector<HistoryFeatures> sequence_features(const StudentSequence& seq) {
  std::vector<HistoryFeatures> out;
  out.reserve(seq.records.size());
  HistoryTracker tracker;
  for (const auto& r : seq.records) {
    out.push_back(tracker.features(r));
    tracker.consume(r);
  }
  return out;
}

std::size_t feature_dimension(const FeatureConfig& c) {
  return 3 + (c.per_skill_counts ? 2 : 0) + (c.skill_onehot ? c.num_skills : 0) +
         (c.item_onehot ? c.num_items : 0);
}

std::string describe(const FeatureConfig& c) {
  std::ostringstream os;
  os << "log_scale=" << c.log_scale << " per_skill_counts=" << c.per_skill_counts
     << " skill_onehot=" << c.skill_onehot << " item_onehot=" << c.item_onehot
     << " num_skills=" << c.num_skills << " num_items=" << c.num_items;
  return os.str();
}

FeatureConfig parse_feature_descriptor(const std::string& text) {
  FeatureConfig c;
  std::istringstream is(text);
  std::string token;
  int seen = 0;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw DataError("malformed feature descriptor token '" + token + "'");
    const auto key = token.substr(0, eq);
    const auto value = std::stoull(token.substr(eq + 1));
    if (key == "log_scale") c.log_scale = value != 0;
    else if (key == "per_skill_counts") c.per_skill_counts = value != 0;
    else if (key == "skill_onehot") c.skill_onehot = value != 0;
    else if (key == "item_onehot") c.item_onehot = value != 0;
    else if (key == "num_skills") c.num_skills = value;
    else if (key == "num_items") c.num_items = value;
    else throw DataError("unknown feature descriptor key '" + key + "'");
    ++seen;
  }
  if (seen != 6) throw DataError("incomplete feature descriptor '" + text + "'");
  return c;
}

std::size_t FeatureVector::nonzeros() const {
  std::size_t n = 0;
  for (double v : values) n += v != 0.0;
  return n;
}

FeatureVector best_lr_vector(const HistoryFeatures& f, const FeatureConfig& c) {
  if (c.skill_onehot && f.skill_id >= c.num_skills) {
    throw std::out_of_range("skill id " + std::to_string(f.skill_id) + " not in vocabulary");
  }
  if (c.item_onehot && f.question_id >= c.num_items) {
    throw std::out_of_range("item id " + std::to_string(f.question_id) + " not in vocabulary");
  }
  auto phi = [&](std::uint32_t x) {
    return c.log_scale ? std::log1p(static_cast<double>(x)) : static_cast<double>(x);
  };
  FeatureVector v;
  v.dimension = feature_dimension(c);
  std::uint32_t col = 0;
  auto push = [&](std::uint32_t index, double value) {
    v.indices.push_back(index);
    v.values.push_back(value);
  };
  push(col++, 1.0);
  push(col++, phi(f.total_correct));
  push(col++, phi(f.total_wrong));
  if (c.per_skill_counts) {
    push(col++, phi(f.skill_correct));
    push(col++, phi(f.skill_wrong));
  }
  if (c.skill_onehot) {
    push(col + f.skill_id, 1.0);
    col += static_cast<std::uint32_t>(c.num_skills);
  }
  if (c.item_onehot) push(col + f.question_id, 1.0);
  return v;
}

}  // namespace kt
