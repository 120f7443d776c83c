#pragma once

#include "kt/features.hpp"
#include "kt/types.hpp"

namespace kt {

struct MeanModel {
  double train_mean = 0.5;
};

/// Fraction of correct responses over every training record.
MeanModel fit_mean(const Dataset& train);

Prediction predict_mean(const MeanModel& m);

/// Running mean of the student's previous responses; the training mean
/// when there is no history.
Prediction predict_nap(const HistoryFeatures& f, const MeanModel& fallback);

/// Running mean restricted to previous responses on the next skill; falls
/// back to predict_nap when the skill has not been seen yet.
Prediction predict_nap_skills(const HistoryFeatures& f, const MeanModel& fallback);

}  // namespace kt
