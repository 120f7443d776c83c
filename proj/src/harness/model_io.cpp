#include "kt/harness/model_io.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "kt/baselines.hpp"
#include "kt/bkt.hpp"
#include "kt/error.hpp"
#include "kt/features.hpp"
#include "kt/hash.hpp"
#include "kt/llm/mock_backend.hpp"
#include "kt/llm/predict.hpp"
#include "kt/llm/replay_backend.hpp"
#include "kt/logreg.hpp"
#include "kt/neural/dkt.hpp"
#include "kt/neural/sakt.hpp"
#include "kt/text_io.hpp"

namespace kt::harness {
namespace {

std::vector<PointOutcome> wrap(const std::vector<Prediction>& predictions) {
  std::vector<PointOutcome> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back({p, {}});
  return out;
}

template <class T>
T param(const ModelConfig& m, const char* key, T fallback) {
  return m.params.contains(key) ? m.params.at(key).get<T>() : fallback;
}

class BaselineModel final : public TrainedModel {
 public:
  BaselineModel(std::string name, MeanModel mean) : name_(std::move(name)), mean_(mean) {}
  std::string name() const override { return name_; }
  std::vector<PointOutcome> predict(const StudentSequence& seq) const override {
    std::vector<PointOutcome> out;
    out.reserve(seq.size());
    HistoryTracker tracker;
    for (const auto& r : seq.records) {
      const auto f = tracker.features(r);
      if (name_ == "mean") out.push_back({predict_mean(mean_), {}});
      else if (name_ == "nap") out.push_back({predict_nap(f, mean_), {}});
      else out.push_back({predict_nap_skills(f, mean_), {}});
      tracker.consume(r);
    }
    return out;
  }
  void save(std::ostream& out) const override { out << "mean " << format_double(mean_.train_mean) << '\n'; }

 private:
  std::string name_;
  MeanModel mean_;
};

class BktTrained final : public TrainedModel {
 public:
  explicit BktTrained(BktModel m) : m_(std::move(m)) {}
  std::string name() const override { return "bkt"; }
  std::vector<PointOutcome> predict(const StudentSequence& seq) const override {
    return wrap(bkt_predict_sequence(m_, seq));
  }
  void save(std::ostream& out) const override { save_bkt(m_, out); }

 private:
  BktModel m_;
};

class LrTrained final : public TrainedModel {
 public:
  LrTrained(LrModel m, bool truncated) : m_(std::move(m)), truncated_(truncated) {}
  std::string name() const override { return "best-lr"; }
  std::vector<PointOutcome> predict(const StudentSequence& seq) const override {
    return wrap(lr_predict_sequence(m_, seq));
  }
  void save(std::ostream& out) const override { save_lr(m_, out); }
  bool truncated() const override { return truncated_; }

 private:
  LrModel m_;
  bool truncated_;
};

class DktTrained final : public TrainedModel {
 public:
  explicit DktTrained(nn::DktModel m) : m_(std::move(m)) {}
  std::string name() const override { return "dkt"; }
  std::vector<PointOutcome> predict(const StudentSequence& seq) const override {
    return wrap(nn::dkt_predict_sequence(m_, seq));
  }
  void save(std::ostream& out) const override { nn::save_dkt(m_, out); }
  bool truncated() const override { return m_.summary.truncated; }

 private:
  nn::DktModel m_;
};

class SaktTrained final : public TrainedModel {
 public:
  explicit SaktTrained(nn::SaktModel m) : m_(std::move(m)) {}
  std::string name() const override { return "sakt"; }
  std::vector<PointOutcome> predict(const StudentSequence& seq) const override {
    return wrap(nn::sakt_predict_sequence(m_, seq));
  }
  void save(std::ostream& out) const override { nn::save_sakt(m_, out); }
  bool truncated() const override { return m_.summary.truncated; }

 private:
  nn::SaktModel m_;
};

class LlmModel final : public TrainedModel {
 public:
  LlmModel(std::string name, std::shared_ptr<llm::LlmBackend> backend, llm::LlmPredictConfig config)
      : name_(std::move(name)), backend_(std::move(backend)), config_(std::move(config)) {
    if (!backend_) throw ConfigError(name_ + " needs an LLM backend");
  }
  std::string name() const override { return name_; }
  std::vector<PointOutcome> predict(const StudentSequence& seq) const override {
    const auto features = sequence_features(seq);
    const auto outcomes = llm::predict_llm_batch(*backend_, config_, features);
    std::vector<PointOutcome> out;
    out.reserve(outcomes.size());
    for (const auto& o : outcomes) out.push_back({o.prediction, o.failure});
    return out;
  }
  void save(std::ostream& out) const override { out << "remote_model " << config_.params.model << '\n'; }

 private:
  std::string name_;
  std::shared_ptr<llm::LlmBackend> backend_;
  llm::LlmPredictConfig config_;
};

llm::LlmPredictConfig llm_config_for(const std::string& name, const LlmConfig& c) {
  llm::LlmPredictConfig p;
  p.prompt_options.split_ids = c.split_ids;
  p.retry = c.retry;
  p.max_in_flight = c.max_in_flight;
  p.surrogate_confidence = c.surrogate_confidence;
  if (name == "llm-zero-shot") {
    p.mode = llm::LlmMode::kZeroShotChat;
    p.params.model = c.chat_model;
    p.params.max_tokens = 5;
  } else {
    p.mode = llm::LlmMode::kFinetunedCompletion;
    p.prompt_template = name == "llm-ft-minimal" ? llm::PromptTemplate::kMinimal
                                                 : llm::PromptTemplate::kExtended;
    p.params.model = name == "llm-ft-minimal" ? c.finetuned_minimal_model : c.finetuned_extended_model;
    p.params.max_tokens = 1;
    p.params.logprobs = 5;
  }
  return p;
}

nn::TrainOptions train_options(const ModelConfig& m, std::uint64_t seed, const ModelContext& ctx) {
  nn::TrainOptions t;
  t.epochs = param(m, "epochs", t.epochs);
  t.batch_size = param(m, "batch_size", t.batch_size);
  t.learning_rate = param(m, "learning_rate", t.learning_rate);
  t.clip_norm = param(m, "clip_norm", t.clip_norm);
  t.seed = seed;
  t.deadline = ctx.deadline;
  return t;
}

}  // namespace

std::string vocabulary_fingerprint(const Dataset& d) {
  std::string text;
  for (const auto& v : d.item_vocab) (text += v) += '\n';
  text += '\x1f';
  for (const auto& v : d.skill_vocab) (text += v) += '\n';
  return hex64(fnv1a64(text));
}

std::shared_ptr<llm::LlmBackend> make_backend(const LlmConfig& config) {
  std::shared_ptr<llm::LlmBackend> backend;
  switch (config.backend) {
    case BackendKind::kMock: backend = std::make_shared<llm::MockBackend>(config.mock); break;
    case BackendKind::kReplay: backend = std::make_shared<llm::ReplayBackend>(config.replay_file); break;
    case BackendKind::kHttp: backend = std::make_shared<llm::HttpBackend>(config.http); break;
  }
  if (!config.record_file.empty()) {
    backend = std::make_shared<llm::RecordingBackend>(std::move(backend), config.record_file);
  }
  return backend;
}

std::unique_ptr<TrainedModel> train_model(const ModelConfig& m, const ExperimentConfig& config,
                                          const Dataset& train, const ModelContext& context) {
  const std::uint64_t seed = model_seed(config, m.name);
  if (m.name == "mean" || m.name == "nap" || m.name == "nap-skills") {
    return std::make_unique<BaselineModel>(m.name, fit_mean(train));
  }
  if (m.name == "bkt") {
    BktFitConfig c;
    c.restarts = param(m, "restarts", c.restarts);
    c.max_iterations = param(m, "max_iterations", c.max_iterations);
    c.tolerance = param(m, "tolerance", c.tolerance);
    c.min_observations = param(m, "min_observations", c.min_observations);
    c.seed = seed;
    return std::make_unique<BktTrained>(fit_bkt(train, c));
  }
  if (m.name == "best-lr") {
    LrFitConfig c;
    c.lambda = param(m, "lambda", c.lambda);
    c.features.log_scale = param(m, "log_scale", c.features.log_scale);
    c.features.per_skill_counts = param(m, "per_skill_counts", c.features.per_skill_counts);
    c.features.skill_onehot = param(m, "skill_onehot", c.features.skill_onehot);
    c.features.item_onehot = param(m, "item_onehot", c.features.item_onehot);
    c.full_batch_limit = param(m, "full_batch_limit", c.full_batch_limit);
    c.max_iterations = param(m, "max_iterations", c.max_iterations);
    c.tolerance = param(m, "tolerance", c.tolerance);
    c.minibatch_size = param(m, "minibatch_size", c.minibatch_size);
    c.minibatch_step = param(m, "minibatch_step", c.minibatch_step);
    c.minibatch_epochs = param(m, "minibatch_epochs", c.minibatch_epochs);
    c.seed = seed;
    c.deadline = context.deadline;
    LrFitTrace trace;
    auto model = fit_best_lr(train, c, &trace);
    return std::make_unique<LrTrained>(std::move(model), trace.truncated);
  }
  if (m.name == "dkt") {
    nn::DktConfig c;
    c.hidden_size = param(m, "hidden_size", c.hidden_size);
    c.max_seq_len = param(m, "max_seq_len", c.max_seq_len);
    c.train = train_options(m, seed, context);
    return std::make_unique<DktTrained>(nn::fit_dkt(train, c));
  }
  if (m.name == "sakt") {
    nn::SaktConfig c;
    c.embed_dim = param(m, "embed_dim", c.embed_dim);
    c.num_heads = param(m, "num_heads", c.num_heads);
    c.window = param(m, "window", c.window);
    c.train = train_options(m, seed, context);
    return std::make_unique<SaktTrained>(nn::fit_sakt(train, c));
  }
  if (is_llm_model(m.name)) {
    return std::make_unique<LlmModel>(m.name, context.backend, llm_config_for(m.name, config.llm));
  }
  throw ConfigError("unknown model '" + m.name + "'");
}

void save_model(const TrainedModel& model, const Dataset& fitted_on, std::ostream& out) {
  out << "kt-model " << model.name() << '\n';
  out << "vocab " << vocabulary_fingerprint(fitted_on) << '\n';
  model.save(out);
  if (!out) throw DataError("failed writing model " + model.name());
}

std::unique_ptr<TrainedModel> load_model(std::istream& in, const Dataset& dataset,
                                         const ExperimentConfig& config,
                                         const ModelContext& context) {
  std::string tag, name, vocab_tag, fingerprint;
  if (!(in >> tag >> name) || tag != "kt-model") throw DataError("not a kt model file");
  if (!(in >> vocab_tag >> fingerprint) || vocab_tag != "vocab") {
    throw DataError("model file lacks a vocabulary fingerprint");
  }
  if (fingerprint != vocabulary_fingerprint(dataset)) {
    throw DataError("model '" + name + "' was fitted on a different vocabulary than the dataset");
  }
  in >> std::ws;
  if (name == "mean" || name == "nap" || name == "nap-skills") {
    std::string key, value;
    if (!(in >> key >> value) || key != "mean") throw DataError("malformed baseline model");
    return std::make_unique<BaselineModel>(name, MeanModel{parse_double(value)});
  }
  if (name == "bkt") return std::make_unique<BktTrained>(load_bkt(in));
  if (name == "best-lr") return std::make_unique<LrTrained>(load_lr(in), false);
  if (name == "dkt") return std::make_unique<DktTrained>(nn::load_dkt(in));
  if (name == "sakt") return std::make_unique<SaktTrained>(nn::load_sakt(in));
  if (is_llm_model(name)) {
    std::string key, remote;
    if (!(in >> key >> remote) || key != "remote_model") throw DataError("malformed LLM model file");
    auto p = llm_config_for(name, config.llm);
    p.params.model = remote;
    return std::make_unique<LlmModel>(name, context.backend, std::move(p));
  }
  throw DataError("model file names unknown model '" + name + "'");
}

}  // namespace kt::harness
