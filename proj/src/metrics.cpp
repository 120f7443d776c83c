#include "kt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "kt/text_io.hpp"

namespace kt {
namespace {

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(a) + " labels vs " +
                                std::to_string(b) + " predictions");
  }
  if (a == 0) throw std::invalid_argument(std::string(what) + ": no points");
}

double ratio(std::size_t num, std::size_t den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion(std::span<const std::uint8_t> labels, std::span<const Label> predicted) {
  require_aligned(labels.size(), predicted.size(), "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool positive = labels[i] != 0;
    const bool said_positive = predicted[i] == Label::kCorrect;
    if (positive) ++(said_positive ? c.tp : c.fn);
    else ++(said_positive ? c.fp : c.tn);
  }
  return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("classification_metrics: empty confusion counts");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  const double specificity = ratio(c.tn, c.tn + c.fp, m.specificity_undefined);
  m.balanced_accuracy = 0.5 * (m.recall + specificity);
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, m.f1_undefined);
  // Zero true positives forces precision, recall and F1 to zero; flag it.
  if (c.tp == 0) m.f1_undefined = true;
  return m;
}

double auc(std::span<const std::uint8_t> labels, std::span<const double> p_correct) {
  require_aligned(labels.size(), p_correct.size(), "auc");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p_correct[a] < p_correct[b]; });

  // Sum of 1-based average ranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && p_correct[order[hi]] == p_correct[order[lo]]) ++hi;
    const double average_rank = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t k = lo; k < hi; ++k) {
      if (labels[order[k]] != 0) {
        positive_rank_sum += average_rank;
        ++positives;
      }
    }
    lo = hi;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedAucError("AUC is undefined: evaluation labels contain a single class");
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double rmse(std::span<const std::uint8_t> labels, std::span<const double> p_correct) {
  require_aligned(labels.size(), p_correct.size(), "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double e = static_cast<double>(labels[i] != 0) - p_correct[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(labels.size()));
}

MetricReport metric_report(std::span<const std::uint8_t> labels,
                           std::span<const Prediction> predictions, std::size_t failures) {
  if (predictions.empty()) {
    throw DataError("nothing to evaluate: " + std::to_string(failures) + " points, all failed");
  }
  require_aligned(labels.size(), predictions.size(), "metric_report");
  std::vector<double> probs(predictions.size());
  std::vector<Label> predicted(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    probs[i] = predictions[i].p_correct;
    predicted[i] = predictions[i].label;
  }
  const auto cm = classification_metrics(confusion(labels, predicted));
  MetricReport r;
  r.accuracy = cm.accuracy;
  r.balanced_accuracy = cm.balanced_accuracy;
  r.precision = cm.precision;
  r.recall = cm.recall;
  r.f1 = cm.f1;
  r.degenerate = cm.degenerate();
  r.auc = auc(labels, probs);
  r.rmse = rmse(labels, probs);
  r.n_points = predictions.size();
  r.failure_count = failures;
  return r;
}

std::string format_report(const MetricReport& r) {
  std::string out;
  auto line = [&](const char* key, const std::string& value) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  };
  line("auc", format_double(r.auc));
  line("f1", format_double(r.f1));
  line("rmse", format_double(r.rmse));
  line("accuracy", format_double(r.accuracy));
  line("balanced_accuracy", format_double(r.balanced_accuracy));
  line("precision", format_double(r.precision));
  line("recall", format_double(r.recall));
  line("n_points", std::to_string(r.n_points));
  line("failure_count", std::to_string(r.failure_count));
  line("degenerate", r.degenerate ? "true" : "false");
  return out;
}

}  // namespace kt
