#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kt/error.hpp"
#include "kt/neural/adam.hpp"
#include "kt/neural/tensor.hpp"
#include "kt/rng.hpp"
#include "kt/types.hpp"

namespace kt::nn {

/// Optimizer settings shared by the sequence models.
struct TrainOptions {
  int epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct TrainingSummary {
  std::vector<double> epoch_losses;
  int epochs_completed = 0;
  bool truncated = false;
};

/// Predict targets [begin, end) of one sequence. Models that read history
/// (SAKT) may look at records before `begin`.
struct SequenceSlice {
  const StudentSequence* sequence = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Consecutive windows of at most `length` targets over every sequence.
inline std::vector<SequenceSlice> chunk_sequences(const Dataset& d, std::size_t length) {
  std::vector<SequenceSlice> out;
  for (const auto& seq : d.sequences) {
    for (std::size_t b = 0; b < seq.records.size(); b += length) {
      out.push_back({&seq, b, std::min(seq.records.size(), b + length)});
    }
  }
  return out;
}

/// Mini-batch Adam with global-norm clipping over shuffled slices.
/// `loss_and_grad(params, batch, grads)` must overwrite `grads` with the
/// gradient of the mean loss over the batch's targets and return that loss.
template <class LossAndGrad>
TrainingSummary train_slices(TensorList& params, std::vector<SequenceSlice> slices,
                             const TrainOptions& options, LossAndGrad&& loss_and_grad) {
  TrainingSummary summary;
  if (slices.empty()) throw DataError("no training sequences");
  Adam adam(params, AdamConfig{options.learning_rate});
  TensorList grads = zeros_like(params);
  Rng rng(options.seed ^ 0x5A17ED5EEDULL);
  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span(slices));
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < slices.size(); b += batch_size) {
      if (options.deadline && std::chrono::steady_clock::now() > *options.deadline) {
        summary.truncated = true;
        return summary;
      }
      const std::span<const SequenceSlice> batch(slices.data() + b,
                                                 std::min(batch_size, slices.size() - b));
      const double loss = loss_and_grad(params, batch, grads);
      const double norm = global_norm(grads);
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        throw ModelError("non-finite training loss at epoch " + std::to_string(epoch) +
                         " (loss=" + std::to_string(loss) +
                         ", gradient norm=" + std::to_string(norm) + ")");
      }
      if (options.clip_norm > 0.0 && norm > options.clip_norm) scale(grads, options.clip_norm / norm);
      adam.step(params, grads);
      total += loss;
      ++batches;
    }
    summary.epoch_losses.push_back(total / static_cast<double>(batches));
    summary.epochs_completed = epoch + 1;
  }
  return summary;
}

}  // namespace kt::nn
