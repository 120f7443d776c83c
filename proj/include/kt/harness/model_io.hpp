#pragma once

#include <chrono>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kt/harness/config.hpp"
#include "kt/llm/backend.hpp"
#include "kt/types.hpp"

namespace kt::harness {

/// Prediction for one test point, or why it could not be produced.
struct PointOutcome {
  std::optional<Prediction> prediction;
  std::string failure;
};

/// A fitted model of any family behind one interface.
class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  /// Config name, e.g. "bkt".
  virtual std::string name() const = 0;
  /// One outcome per record; the outcome for record i depends only on
  /// records before i.
  virtual std::vector<PointOutcome> predict(const StudentSequence& seq) const = 0;
  virtual void save(std::ostream& out) const = 0;
  /// True when the model stopped early because of its time budget.
  virtual bool truncated() const { return false; }
};

/// Resources for models that call out to an LLM backend.
struct ModelContext {
  std::shared_ptr<llm::LlmBackend> backend;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

std::unique_ptr<TrainedModel> train_model(const ModelConfig& model, const ExperimentConfig& config,
                                          const Dataset& train, const ModelContext& context);

/// Writes "kt-model <name>", the dataset vocabulary fingerprint and the
/// family payload.
void save_model(const TrainedModel& model, const Dataset& fitted_on, std::ostream& out);

/// Throws DataError when the stored fingerprint differs from `dataset`'s.
std::unique_ptr<TrainedModel> load_model(std::istream& in, const Dataset& dataset,
                                         const ExperimentConfig& config,
                                         const ModelContext& context);

/// Hash over item and skill vocabularies.
std::string vocabulary_fingerprint(const Dataset& d);

/// Backend described by the config, wrapped for recording when requested.
std::shared_ptr<llm::LlmBackend> make_backend(const LlmConfig& config);

}  // namespace kt::harness
