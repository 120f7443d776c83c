#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "kt/features.hpp"
#include "kt/types.hpp"

namespace kt {

struct LrModel {
  std::vector<double> weights;
  FeatureConfig features;
  std::vector<std::string> skill_names;
};

/// Row-compressed design matrix with binary labels.
struct LrBatch {
  std::size_t dimension = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::vector<std::uint8_t> labels;

  std::size_t rows() const { return labels.size(); }
  void add(const FeatureVector& x, std::uint8_t label);
};

double sigmoid(double z);

/// sigma(w . x). Throws std::invalid_argument on dimension mismatch.
Prediction lr_predict(const LrModel& m, const FeatureVector& x);

/// Mean cross-entropy over the batch plus lambda/2 * |w|^2.
double lr_loss(std::span<const double> w, const LrBatch& batch, double lambda);

/// Gradient of lr_loss with respect to w.
std::vector<double> lr_gradient(std::span<const double> w, const LrBatch& batch, double lambda);

struct LrFitConfig {
  FeatureConfig features;  // num_skills/num_items are filled from the data
  double lambda = 1e-4;
  /// Row count at which training switches from full-batch to mini-batch.
  std::size_t full_batch_limit = 1'000'000;
  int max_iterations = 1000;
  double tolerance = 1e-10;
  std::size_t minibatch_size = 512;
  double minibatch_step = 0.1;
  int minibatch_epochs = 20;
  std::uint64_t seed = 0;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct LrFitTrace {
  /// Full-batch: loss per iteration. Mini-batch: mean loss per epoch.
  std::vector<double> losses;
  bool full_batch = true;
  bool truncated = false;
};

LrBatch build_lr_batch(const Dataset& d, const FeatureConfig& config);

LrModel fit_best_lr(const Dataset& train, const LrFitConfig& config = {},
                    LrFitTrace* trace = nullptr);

/// Minimizes over an explicit batch; used by fit_best_lr and directly by tests.
std::vector<double> fit_logistic(const LrBatch& batch, const LrFitConfig& config,
                                 LrFitTrace* trace = nullptr);

std::vector<Prediction> lr_predict_sequence(const LrModel& m, const StudentSequence& seq);

void save_lr(const LrModel& m, std::ostream& out);
LrModel load_lr(std::istream& in);

}  // namespace kt
