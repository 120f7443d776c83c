#include "kt/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "kt/error.hpp"
#include "kt/rng.hpp"
#include "kt/simd/kernels.hpp"
#include "kt/text_io.hpp"

namespace kt {

void LrBatch::add(const FeatureVector& x, std::uint8_t label) {
  if (x.dimension != dimension) throw std::invalid_argument("feature dimension mismatch in batch");
  indices.insert(indices.end(), x.indices.begin(), x.indices.end());
  values.insert(values.end(), x.values.begin(), x.values.end());
  row_offsets.push_back(indices.size());
  labels.push_back(label);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double row_dot(std::span<const double> w, const LrBatch& b, std::size_t row) {
  double z = 0.0;
  for (std::size_t k = b.row_offsets[row]; k < b.row_offsets[row + 1]; ++k) {
    z += w[b.indices[k]] * b.values[k];
  }
  return z;
}

double l2(std::span<const double> w) { return simd::dot(w, w); }

// Loss and, when grad is set, its gradient over the given rows.
double evaluate(std::span<const double> w, const LrBatch& b, double lambda,
                std::span<const std::size_t> rows, std::vector<double>* grad) {
  if (grad) grad->assign(w.size(), 0.0);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (std::size_t row : rows) {
    const double z = row_dot(w, b, row);
    const double y = b.labels[row];
    loss += softplus(z) - y * z;
    if (grad) {
      const double r = (sigmoid(z) - y) * inv_n;
      for (std::size_t k = b.row_offsets[row]; k < b.row_offsets[row + 1]; ++k) {
        (*grad)[b.indices[k]] += r * b.values[k];
      }
    }
  }
  if (grad) simd::axpy(lambda, w, *grad);
  return loss * inv_n + 0.5 * lambda * l2(w);
}

std::vector<std::size_t> all_rows(const LrBatch& b) {
  std::vector<std::size_t> rows(b.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

[[noreturn]] void diverged(const LrFitConfig& c, double loss) {
  throw ModelError("logistic regression diverged (loss=" + format_double(loss) +
                   "); config: lambda=" + format_double(c.lambda) +
                   " max_iterations=" + std::to_string(c.max_iterations) +
                   " minibatch_step=" + format_double(c.minibatch_step) +
                   " features{" + describe(c.features) + "}");
}

bool past(const std::optional<std::chrono::steady_clock::time_point>& deadline) {
  return deadline && std::chrono::steady_clock::now() > *deadline;
}

}  // namespace

Prediction lr_predict(const LrModel& m, const FeatureVector& x) {
  if (x.dimension != m.weights.size()) {
    throw std::invalid_argument("feature dimension " + std::to_string(x.dimension) +
                                " does not match model dimension " +
                                std::to_string(m.weights.size()));
  }
  double z = 0.0;
  for (std::size_t k = 0; k < x.indices.size(); ++k) z += m.weights[x.indices[k]] * x.values[k];
  return make_prediction(sigmoid(z));
}

double lr_loss(std::span<const double> w, const LrBatch& batch, double lambda) {
  const auto rows = all_rows(batch);
  return evaluate(w, batch, lambda, rows, nullptr);
}

std::vector<double> lr_gradient(std::span<const double> w, const LrBatch& batch, double lambda) {
  if (batch.rows() == 0) throw std::invalid_argument("lr_gradient needs a non-empty batch");
  std::vector<double> grad;
  const auto rows = all_rows(batch);
  evaluate(w, batch, lambda, rows, &grad);
  return grad;
}

LrBatch build_lr_batch(const Dataset& d, const FeatureConfig& config) {
  LrBatch batch;
  batch.dimension = feature_dimension(config);
  for (const auto& seq : d.sequences) {
    HistoryTracker tracker;
    for (const auto& r : seq.records) {
      batch.add(best_lr_vector(tracker.features(r), config), r.correct);
      tracker.consume(r);
    }
  }
  return batch;
}

std::vector<double> fit_logistic(const LrBatch& batch, const LrFitConfig& config,
                                 LrFitTrace* trace) {
  if (batch.rows() == 0) throw DataError("cannot fit logistic regression on an empty training set");
  LrFitTrace local;
  LrFitTrace& t = trace ? *trace : local;
  t = LrFitTrace{};
  std::vector<double> w(batch.dimension, 0.0);
  std::vector<double> grad;
  const auto rows = all_rows(batch);

  if (batch.rows() < config.full_batch_limit) {
    // Gradient descent with Armijo backtracking; the step carries over and
    // is allowed to grow between iterations.
    t.full_batch = true;
    double loss = evaluate(w, batch, config.lambda, rows, &grad);
    t.losses.push_back(loss);
    double step = 1.0;
    std::vector<double> trial(w.size());
    for (int it = 0; it < config.max_iterations; ++it) {
      if (past(config.deadline)) {
        t.truncated = true;
        break;
      }
      const double g2 = l2(grad);
      if (g2 < 1e-24) break;
      step *= 2.0;
      double trial_loss = 0.0;
      while (true) {
        std::copy(w.begin(), w.end(), trial.begin());
        simd::axpy(-step, grad, trial);
        trial_loss = evaluate(trial, batch, config.lambda, rows, nullptr);
        if (!std::isfinite(trial_loss) && step < 1e-30) diverged(config, trial_loss);
        if (std::isfinite(trial_loss) && trial_loss <= loss - 1e-4 * step * g2) break;
        step *= 0.5;
        if (step < 1e-30) break;
      }
      if (step < 1e-30) break;
      w.swap(trial);
      const double previous = loss;
      loss = evaluate(w, batch, config.lambda, rows, &grad);
      if (!std::isfinite(loss)) diverged(config, loss);
      t.losses.push_back(loss);
      if (previous - loss < config.tolerance * std::max(1.0, std::abs(previous))) break;
    }
    return w;
  }

  t.full_batch = false;
  Rng rng(config.seed);
  std::vector<std::size_t> order = rows;
  for (int epoch = 0; epoch < config.minibatch_epochs; ++epoch) {
    if (past(config.deadline)) {
      t.truncated = true;
      break;
    }
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.minibatch_size) {
      const std::size_t end = std::min(order.size(), begin + config.minibatch_size);
      const std::span<const std::size_t> slice(order.data() + begin, end - begin);
      const double loss = evaluate(w, batch, config.lambda, slice, &grad);
      if (!std::isfinite(loss)) diverged(config, loss);
      epoch_loss += loss;
      ++batches;
      simd::axpy(-config.minibatch_step, grad, w);
    }
    t.losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  return w;
}

LrModel fit_best_lr(const Dataset& train, const LrFitConfig& config, LrFitTrace* trace) {
  LrModel m;
  m.features = config.features;
  m.features.num_skills = train.num_skills();
  m.features.num_items = train.num_items();
  m.skill_names = train.skill_vocab;
  const auto batch = build_lr_batch(train, m.features);
  m.weights = fit_logistic(batch, config, trace);
  return m;
}

std::vector<Prediction> lr_predict_sequence(const LrModel& m, const StudentSequence& seq) {
  std::vector<Prediction> out;
  out.reserve(seq.records.size());
  HistoryTracker tracker;
  for (const auto& r : seq.records) {
    out.push_back(lr_predict(m, best_lr_vector(tracker.features(r), m.features)));
    tracker.consume(r);
  }
  return out;
}

void save_lr(const LrModel& m, std::ostream& out) {
  out << "kt-best-lr 1\n";
  out << "features " << describe(m.features) << '\n';
  out << "vocab " << m.skill_names.size() << '\n';
  for (const auto& name : m.skill_names) out << name << '\n';
  out << "weights " << m.weights.size() << '\n';
  for (double w : m.weights) out << format_double(w) << '\n';
}

LrModel load_lr(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "kt-best-lr 1") throw DataError("not a Best-LR model file");
  LrModel m;
  if (!std::getline(in, line) || line.rfind("features ", 0) != 0) {
    throw DataError("Best-LR model missing feature descriptor");
  }
  m.features = parse_feature_descriptor(line.substr(9));
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "vocab") throw DataError("Best-LR model missing vocabulary");
  std::getline(in, line);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw DataError("truncated Best-LR vocabulary");
    m.skill_names.push_back(line);
  }
  if (!(in >> tag >> n) || tag != "weights") throw DataError("Best-LR model missing weights");
  if (n != feature_dimension(m.features)) throw DataError("Best-LR weight count does not match descriptor");
  m.weights.resize(n);
  for (auto& w : m.weights) {
    std::string token;
    if (!(in >> token)) throw DataError("truncated Best-LR weights");
    w = parse_double(token);
  }
  return m;
}

}  // namespace kt
