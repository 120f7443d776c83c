#include "kt/baselines.hpp"

#include "kt/error.hpp"

namespace kt {

MeanModel fit_mean(const Dataset& train) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& seq : train.sequences) {
    for (const auto& r : seq.records) {
      correct += r.correct;
      ++total;
    }
  }
  if (total == 0) throw DataError("cannot fit the mean baseline on an empty training set");
  return MeanModel{static_cast<double>(correct) / static_cast<double>(total)};
}

Prediction predict_mean(const MeanModel& m) { return make_prediction(m.train_mean); }

Prediction predict_nap(const HistoryFeatures& f, const MeanModel& fallback) {
  const auto seen = f.total_correct + f.total_wrong;
  if (seen == 0) return predict_mean(fallback);
  return make_prediction(static_cast<double>(f.total_correct) / static_cast<double>(seen));
}

Prediction predict_nap_skills(const HistoryFeatures& f, const MeanModel& fallback) {
  const auto seen = f.skill_correct + f.skill_wrong;
  if (seen == 0) return predict_nap(f, fallback);
  return make_prediction(static_cast<double>(f.skill_correct) / static_cast<double>(seen));
}

}  // namespace kt
