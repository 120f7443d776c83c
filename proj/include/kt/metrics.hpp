#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "kt/error.hpp"
#include "kt/types.hpp"

namespace kt {

/// CORRECT is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Threshold metrics. A component whose denominator is zero is reported as 0
/// and its flag is set.
struct ClassificationMetrics {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool precision_undefined = false;
  bool recall_undefined = false;
  bool specificity_undefined = false;
  bool f1_undefined = false;

  bool degenerate() const {
    return precision_undefined || recall_undefined || specificity_undefined || f1_undefined;
  }
};

struct MetricReport {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  double rmse = 0.0;
  std::size_t n_points = 0;
  std::size_t failure_count = 0;
  bool degenerate = false;
};

/// Thrown when AUC is requested for labels of a single class.
class UndefinedAucError : public DataError {
 public:
  using DataError::DataError;
};

ConfusionCounts confusion(std::span<const std::uint8_t> labels, std::span<const Label> predicted);

/// Throws std::invalid_argument when the counts are all zero.
ClassificationMetrics classification_metrics(const ConfusionCounts& c);

/// Mann-Whitney statistic with ties counted one half.
double auc(std::span<const std::uint8_t> labels, std::span<const double> p_correct);

double rmse(std::span<const std::uint8_t> labels, std::span<const double> p_correct);

/// `predictions` holds the evaluated points only; `failures` counts points
/// whose prediction could not be obtained.
MetricReport metric_report(std::span<const std::uint8_t> labels,
                           std::span<const Prediction> predictions, std::size_t failures = 0);

/// key=value lines, one metric per line.
std::string format_report(const MetricReport& report);

}  // namespace kt
