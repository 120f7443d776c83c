#include "kt/neural/dkt.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "kt/error.hpp"
#include "kt/logreg.hpp"
#include "kt/neural/checkpoint.hpp"
#include "kt/simd/kernels.hpp"

namespace kt::nn {
namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Per-slice activations kept for backpropagation through time.
struct Workspace {
  std::size_t hidden = 0;
  std::vector<double> h;      // states s_0..s_{L-1}, row per state
  std::vector<double> c;      // cell states
  std::vector<double> tanh_c; // tanh of cell states
  std::vector<double> gates;  // activated gates of step t (producing s_{t+1})
  std::vector<double> logits;

  void resize(std::size_t steps, std::size_t hidden_size) {
    hidden = hidden_size;
    h.assign(steps * hidden, 0.0);
    c.assign(steps * hidden, 0.0);
    tanh_c.assign(steps * hidden, 0.0);
    gates.assign(steps * 4 * hidden, 0.0);
    logits.assign(steps, 0.0);
  }
  double* h_at(std::size_t t) { return h.data() + t * hidden; }
  double* c_at(std::size_t t) { return c.data() + t * hidden; }
  double* tc_at(std::size_t t) { return tanh_c.data() + t * hidden; }
  double* gates_at(std::size_t t) { return gates.data() + t * 4 * hidden; }
};

// Advances one LSTM step from state t to t+1 on input index `input`.
void lstm_step(const TensorList& p, std::size_t input, Workspace& ws, std::size_t t) {
  const std::size_t H = ws.hidden;
  double* z = ws.gates_at(t);
  const double* wx = p[DktModel::kInput].row(input);
  const double* b = p[DktModel::kBias].data.data();
  for (std::size_t j = 0; j < 4 * H; ++j) z[j] = wx[j] + b[j];
  simd::gemv(p[DktModel::kRecurrent].data.data(), 4 * H, H, ws.h_at(t), z);
  const double* c_prev = ws.c_at(t);
  double* c_next = ws.c_at(t + 1);
  double* tc_next = ws.tc_at(t + 1);
  double* h_next = ws.h_at(t + 1);
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigmoid(z[j]);
    const double f = sigmoid(z[H + j]);
    const double g = std::tanh(z[2 * H + j]);
    const double o = sigmoid(z[3 * H + j]);
    z[j] = i;
    z[H + j] = f;
    z[2 * H + j] = g;
    z[3 * H + j] = o;
    c_next[j] = f * c_prev[j] + i * g;
    tc_next[j] = std::tanh(c_next[j]);
    h_next[j] = o * tc_next[j];
  }
}

double read_logit(const TensorList& p, SkillId skill, const double* h, std::size_t H) {
  return simd::dot({p[DktModel::kOutput].row(skill), H}, {h, H}) +
         p[DktModel::kOutputBias].data[skill];
}

void check_skill(SkillId skill, std::size_t n_skills) {
  if (skill >= n_skills) {
    throw std::out_of_range("skill id " + std::to_string(skill) + " outside DKT vocabulary of " +
                            std::to_string(n_skills));
  }
}

}  // namespace

std::size_t dkt_input_index(const InteractionRecord& record, std::size_t n_skills) {
  check_skill(record.skill, n_skills);
  return record.skill + static_cast<std::size_t>(record.correct) * n_skills;
}

std::vector<double> encode_dkt_input(const InteractionRecord& record, std::size_t n_skills) {
  std::vector<double> x(2 * n_skills, 0.0);
  x[dkt_input_index(record, n_skills)] = 1.0;
  return x;
}

DktModel init_dkt(std::size_t n_skills, std::vector<std::string> skill_names,
                  const DktConfig& config) {
  if (n_skills == 0) throw DataError("DKT needs a non-empty skill vocabulary");
  if (config.hidden_size == 0) throw ConfigError("DKT hidden_size must be >= 1");
  if (config.max_seq_len < 2) throw ConfigError("DKT max_seq_len must be >= 2");
  const std::size_t H = config.hidden_size;
  DktModel m;
  m.config = config;
  m.num_skills = n_skills;
  m.skill_names = std::move(skill_names);
  m.params.emplace_back("input", 2 * n_skills, 4 * H);
  m.params.emplace_back("recurrent", 4 * H, H);
  m.params.emplace_back("bias", 1, 4 * H);
  m.params.emplace_back("output", n_skills, H);
  m.params.emplace_back("output_bias", 1, n_skills);

  Rng rng(config.train.seed);
  const double limit = 1.0 / std::sqrt(static_cast<double>(H));
  init_uniform(m.params[DktModel::kInput], rng, limit);
  init_uniform(m.params[DktModel::kRecurrent], rng, limit);
  for (std::size_t j = H; j < 2 * H; ++j) m.params[DktModel::kBias].data[j] = 1.0;
  return m;
}

double dkt_loss(const DktModel& model, const TensorList& p, std::span<const SequenceSlice> slices,
                TensorList* grads) {
  const std::size_t H = model.config.hidden_size;
  const std::size_t N = model.num_skills;
  std::size_t targets = 0;
  for (const auto& s : slices) targets += s.end - s.begin;
  if (targets == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(targets);
  if (grads) set_zero(*grads);

  Workspace ws;
  std::vector<double> dh(H), dc(H), dz(4 * H), dh_prev(H);
  double loss = 0.0;
  for (const auto& slice : slices) {
    const auto* rec = slice.sequence->records.data() + slice.begin;
    const std::size_t L = slice.end - slice.begin;
    ws.resize(L, H);
    for (std::size_t t = 0; t < L; ++t) {
      check_skill(rec[t].skill, N);
      ws.logits[t] = read_logit(p, rec[t].skill, ws.h_at(t), H);
      loss += softplus(ws.logits[t]) - rec[t].correct * ws.logits[t];
      if (t + 1 < L) lstm_step(p, dkt_input_index(rec[t], N), ws, t);
    }
    if (!grads) continue;

    auto& g = *grads;
    std::fill(dh.begin(), dh.end(), 0.0);
    std::fill(dc.begin(), dc.end(), 0.0);
    for (std::size_t t = L; t-- > 0;) {
      const SkillId k = rec[t].skill;
      const double dlogit = (sigmoid(ws.logits[t]) - rec[t].correct) * inv;
      simd::axpy(dlogit, {ws.h_at(t), H}, g[DktModel::kOutput].row_span(k));
      g[DktModel::kOutputBias].data[k] += dlogit;
      simd::axpy(dlogit, p[DktModel::kOutput].row_span(k), dh);
      if (t == 0) break;

      // Step t-1 produced state t from state t-1.
      const double* gate = ws.gates_at(t - 1);
      const double* c_prev = ws.c_at(t - 1);
      const double* tc = ws.tc_at(t);
      for (std::size_t j = 0; j < H; ++j) {
        const double i = gate[j], f = gate[H + j], gg = gate[2 * H + j], o = gate[3 * H + j];
        const double dct = dc[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
        dz[j] = dct * gg * i * (1.0 - i);
        dz[H + j] = dct * c_prev[j] * f * (1.0 - f);
        dz[2 * H + j] = dct * i * (1.0 - gg * gg);
        dz[3 * H + j] = dh[j] * tc[j] * o * (1.0 - o);
        dc[j] = dct * f;
      }
      simd::axpy(1.0, dz, g[DktModel::kInput].row_span(dkt_input_index(rec[t - 1], N)));
      simd::axpy(1.0, dz, g[DktModel::kBias].data);
      simd::ger(1.0, dz.data(), 4 * H, ws.h_at(t - 1), H, g[DktModel::kRecurrent].data.data());
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      simd::gemv_t(p[DktModel::kRecurrent].data.data(), 4 * H, H, dz.data(), dh_prev.data());
      dh.swap(dh_prev);
    }
  }
  return loss * inv;
}

DktModel fit_dkt(const Dataset& train, const DktConfig& config) {
  DktModel model = init_dkt(train.num_skills(), train.skill_vocab, config);
  auto slices = chunk_sequences(train, config.max_seq_len);
  model.summary = train_slices(
      model.params, std::move(slices), config.train,
      [&](const TensorList& params, std::span<const SequenceSlice> batch, TensorList& grads) {
        return dkt_loss(model, params, batch, &grads);
      });
  return model;
}

std::vector<Prediction> dkt_predict_sequence(const DktModel& model, const StudentSequence& seq) {
  const std::size_t H = model.config.hidden_size;
  std::vector<Prediction> out;
  out.reserve(seq.records.size());
  Workspace ws;
  for (std::size_t b = 0; b < seq.records.size(); b += model.config.max_seq_len) {
    const std::size_t L = std::min(model.config.max_seq_len, seq.records.size() - b);
    ws.resize(L, H);
    for (std::size_t t = 0; t < L; ++t) {
      const auto& r = seq.records[b + t];
      check_skill(r.skill, model.num_skills);
      out.push_back(make_prediction(sigmoid(read_logit(model.params, r.skill, ws.h_at(t), H))));
      if (t + 1 < L) lstm_step(model.params, dkt_input_index(r, model.num_skills), ws, t);
    }
  }
  return out;
}

std::vector<double> dkt_skill_probabilities(const DktModel& model,
                                            std::span<const InteractionRecord> history) {
  const std::size_t H = model.config.hidden_size;
  Workspace ws;
  ws.resize(history.size() + 1, H);
  for (std::size_t t = 0; t < history.size(); ++t) {
    lstm_step(model.params, dkt_input_index(history[t], model.num_skills), ws, t);
  }
  std::vector<double> probs(model.num_skills);
  for (SkillId k = 0; k < model.num_skills; ++k) {
    probs[k] = sigmoid(read_logit(model.params, k, ws.h_at(history.size()), H));
  }
  return probs;
}

void save_dkt(const DktModel& model, std::ostream& out) {
  Checkpoint ckpt;
  ckpt.kind = "dkt";
  ckpt.meta["hidden_size"] = std::to_string(model.config.hidden_size);
  ckpt.meta["max_seq_len"] = std::to_string(model.config.max_seq_len);
  ckpt.meta["num_skills"] = std::to_string(model.num_skills);
  ckpt.vocab = model.skill_names;
  ckpt.tensors = model.params;
  save_checkpoint(ckpt, out);
}

DktModel load_dkt(std::istream& in) {
  auto ckpt = load_checkpoint(in);
  if (ckpt.kind != "dkt") throw DataError("checkpoint holds '" + ckpt.kind + "', expected dkt");
  DktConfig config;
  try {
    config.hidden_size = std::stoul(ckpt.meta.at("hidden_size"));
    config.max_seq_len = std::stoul(ckpt.meta.at("max_seq_len"));
  } catch (const std::exception&) {
    throw DataError("DKT checkpoint missing shape metadata");
  }
  DktModel m = init_dkt(ckpt.vocab.size(), ckpt.vocab, config);
  if (ckpt.tensors.size() != m.params.size()) throw DataError("DKT checkpoint tensor count mismatch");
  for (std::size_t k = 0; k < m.params.size(); ++k) {
    const auto& t = ckpt.tensors[k];
    if (t.name != m.params[k].name || t.rows != m.params[k].rows || t.cols != m.params[k].cols) {
      throw DataError("DKT checkpoint tensor '" + t.name + "' has unexpected shape");
    }
  }
  m.params = std::move(ckpt.tensors);
  return m;
}

}  // namespace kt::nn
