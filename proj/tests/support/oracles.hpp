#pragma once

// Brute-force reference implementations, written independently of the
// library code they check.

#include <cmath>
#include <cstdint>
#include <vector>

namespace kt::test {

/// Direct pairwise AUC: fraction of (positive, negative) pairs with the
/// positive scored higher, ties counted one half.
inline double pairwise_auc(const std::vector<std::uint8_t>& y, const std::vector<double>& p) {
  double good = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      if (p[i] > p[j]) good += 1.0;
      else if (p[i] == p[j]) good += 0.5;
    }
  }
  return good / pairs;
}

struct OracleMetrics {
  double accuracy, balanced_accuracy, precision, recall, f1, rmse;
};

/// Threshold metrics by explicit enumeration; 0/0 terms read as 0.
inline OracleMetrics direct_metrics(const std::vector<std::uint8_t>& y, const std::vector<double>& p) {
  double tp = 0, tn = 0, fp = 0, fn = 0, se = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool said = p[i] >= 0.5;
    if (y[i] && said) tp += 1;
    if (y[i] && !said) fn += 1;
    if (!y[i] && said) fp += 1;
    if (!y[i] && !said) tn += 1;
    se += (y[i] - p[i]) * (y[i] - p[i]);
  }
  auto div = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
  const double precision = div(tp, tp + fp);
  const double recall = div(tp, tp + fn);
  const double specificity = div(tn, tn + fp);
  return {(tp + tn) / static_cast<double>(y.size()),
          (recall + specificity) / 2,
          precision,
          recall,
          div(2 * precision * recall, precision + recall),
          std::sqrt(se / static_cast<double>(y.size()))};
}

/// BKT forward filtering for one skill's response sequence; returns the
/// predicted p_correct before each response.
inline std::vector<double> bkt_filter(double init, double learn, double guess, double slip,
                                      const std::vector<int>& responses) {
  std::vector<double> out;
  double know = init;
  for (int r : responses) {
    const double pc = know * (1 - slip) + (1 - know) * guess;
    out.push_back(pc);
    const double post = r ? know * (1 - slip) / pc : know * slip / (1 - pc);
    know = post + (1 - post) * learn;
  }
  return out;
}

}  // namespace kt::test
