#include "kt/neural/sakt.hpp"

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

using P = SaktModel::Param;

constexpr double kNormEpsilon = 1e-5;

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

std::size_t interaction_index(const InteractionRecord& r, std::size_t n_skills) {
  if (r.skill >= n_skills) {
    throw std::out_of_range("skill id " + std::to_string(r.skill) + " outside SAKT vocabulary of " +
                            std::to_string(n_skills));
  }
  return r.skill + static_cast<std::size_t>(r.correct) * n_skills;
}

// y = W x (+ bias), W stored out x in.
void affine(const Tensor& w, const Tensor* bias, const double* x, double* y) {
  if (bias) std::copy(bias->data.begin(), bias->data.end(), y);
  else std::fill(y, y + w.rows, 0.0);
  simd::gemv(w.data.data(), w.rows, w.cols, x, y);
}

struct NormCache {
  std::vector<double> xhat;
  double inv_std = 0.0;
};

void layer_norm(const double* x, const Tensor& gain, const Tensor& bias, double* y,
                NormCache& cache, std::size_t d) {
  double mean = 0.0;
  for (std::size_t j = 0; j < d; ++j) mean += x[j];
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (std::size_t j = 0; j < d; ++j) var += (x[j] - mean) * (x[j] - mean);
  var /= static_cast<double>(d);
  cache.inv_std = 1.0 / std::sqrt(var + kNormEpsilon);
  cache.xhat.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    cache.xhat[j] = (x[j] - mean) * cache.inv_std;
    y[j] = gain.data[j] * cache.xhat[j] + bias.data[j];
  }
}

// dx from dy; accumulates gain/bias gradients.
void layer_norm_backward(const double* dy, const Tensor& gain, const NormCache& cache,
                         Tensor& dgain, Tensor& dbias, double* dx, std::size_t d) {
  double mean_dxhat = 0.0;
  double mean_dxhat_xhat = 0.0;
  std::vector<double> dxhat(d);
  for (std::size_t j = 0; j < d; ++j) {
    dgain.data[j] += dy[j] * cache.xhat[j];
    dbias.data[j] += dy[j];
    dxhat[j] = dy[j] * gain.data[j];
    mean_dxhat += dxhat[j];
    mean_dxhat_xhat += dxhat[j] * cache.xhat[j];
  }
  mean_dxhat /= static_cast<double>(d);
  mean_dxhat_xhat /= static_cast<double>(d);
  for (std::size_t j = 0; j < d; ++j) {
    dx[j] = cache.inv_std * (dxhat[j] - mean_dxhat - cache.xhat[j] * mean_dxhat_xhat);
  }
}

// Per-call projections that do not depend on the sequence.
struct Shared {
  std::vector<double> dist_key, dist_value;  // window x d
  std::vector<double> start_key, start_value;
};

Shared project_shared(const TensorList& p, std::size_t d, std::size_t window) {
  Shared s;
  s.dist_key.assign(window * d, 0.0);
  s.dist_value.assign(window * d, 0.0);
  for (std::size_t r = 0; r < window; ++r) {
    affine(p[P::kKey], nullptr, p[P::kDistance].row(r), s.dist_key.data() + r * d);
    affine(p[P::kValue], nullptr, p[P::kDistance].row(r), s.dist_value.data() + r * d);
  }
  s.start_key.assign(d, 0.0);
  s.start_value.assign(d, 0.0);
  affine(p[P::kKey], nullptr, p[P::kStart].row(0), s.start_key.data());
  affine(p[P::kValue], nullptr, p[P::kStart].row(0), s.start_value.data());
  return s;
}

// Key/value projections of interaction embeddings for positions
// [first, last) of one sequence.
struct Projected {
  std::size_t first = 0;
  std::vector<double> key, value;
};

Projected project_positions(const TensorList& p, const StudentSequence& seq, std::size_t first,
                            std::size_t last, std::size_t n_skills, std::size_t d) {
  Projected pr;
  pr.first = first;
  const std::size_t n = last > first ? last - first : 0;
  pr.key.assign(n * d, 0.0);
  pr.value.assign(n * d, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    const double* e = p[P::kInteraction].row(interaction_index(seq.records[first + m], n_skills));
    affine(p[P::kKey], nullptr, e, pr.key.data() + m * d);
    affine(p[P::kValue], nullptr, e, pr.value.data() + m * d);
  }
  return pr;
}

// Forward activations of one query, kept for its backward pass.
struct Target {
  std::size_t first_visible = 0;  // oldest visible position
  std::size_t keys = 0;           // 1 + visible positions
  std::vector<double> query, keys_buf, values_buf, weights, context, u1, z1, a1, f1, u2, z2;
  NormCache norm1, norm2;
  double logit = 0.0;
};

class Evaluator {
 public:
  Evaluator(const SaktModel& model, const TensorList& params)
      : m_(model), p_(params), d_(model.config.embed_dim), heads_(model.config.num_heads),
        window_(model.config.window), shared_(project_shared(params, d_, window_)) {}

  const Shared& shared() const { return shared_; }

  void forward(const StudentSequence& seq, const Projected& pr, std::size_t i, Target& t) const {
    const std::size_t d = d_;
    const std::size_t dh = d / heads_;
    const SkillId skill = seq.records[i].skill;
    if (skill >= m_.num_skills) {
      throw std::out_of_range("skill id " + std::to_string(skill) + " outside SAKT vocabulary");
    }
    t.first_visible = i >= window_ - 1 ? i - (window_ - 1) : 0;
    t.keys = 1 + (i - t.first_visible);
    t.query.assign(d, 0.0);
    affine(p_[P::kQuery], &p_[P::kQueryBias], p_[P::kSkill].row(skill), t.query.data());

    t.keys_buf.assign(t.keys * d, 0.0);
    t.values_buf.assign(t.keys * d, 0.0);
    const double* bk = p_[P::kKeyBias].data.data();
    const double* bv = p_[P::kValueBias].data.data();
    for (std::size_t s = 0; s < t.keys; ++s) {
      const double* kbase;
      const double* vbase;
      std::size_t distance = 0;
      if (s == 0) {
        kbase = shared_.start_key.data();
        vbase = shared_.start_value.data();
      } else {
        const std::size_t j = t.first_visible + s - 1;
        kbase = pr.key.data() + (j - pr.first) * d;
        vbase = pr.value.data() + (j - pr.first) * d;
        distance = i - j;
      }
      const double* dk = shared_.dist_key.data() + distance * d;
      const double* dv = shared_.dist_value.data() + distance * d;
      double* k = t.keys_buf.data() + s * d;
      double* v = t.values_buf.data() + s * d;
      for (std::size_t c = 0; c < d; ++c) {
        k[c] = kbase[c] + dk[c] + bk[c];
        v[c] = vbase[c] + dv[c] + bv[c];
      }
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    t.weights.assign(heads_ * t.keys, 0.0);
    t.context.assign(d, 0.0);
    for (std::size_t h = 0; h < heads_; ++h) {
      double* w = t.weights.data() + h * t.keys;
      double top = -INFINITY;
      for (std::size_t s = 0; s < t.keys; ++s) {
        w[s] = simd::dot({t.query.data() + h * dh, dh}, {t.keys_buf.data() + s * d + h * dh, dh}) *
               scale;
        top = std::max(top, w[s]);
      }
      double total = 0.0;
      for (std::size_t s = 0; s < t.keys; ++s) total += (w[s] = std::exp(w[s] - top));
      for (std::size_t s = 0; s < t.keys; ++s) {
        w[s] /= total;
        simd::axpy(w[s], {t.values_buf.data() + s * d + h * dh, dh},
                   {t.context.data() + h * dh, dh});
      }
    }

    t.u1.assign(d, 0.0);
    affine(p_[P::kOut], &p_[P::kOutBias], t.context.data(), t.u1.data());
    const double* skill_embed = p_[P::kSkill].row(skill);
    for (std::size_t c = 0; c < d; ++c) t.u1[c] += skill_embed[c];
    t.z1.assign(d, 0.0);
    layer_norm(t.u1.data(), p_[P::kNorm1Gain], p_[P::kNorm1Bias], t.z1.data(), t.norm1, d);

    t.a1.assign(d, 0.0);
    affine(p_[P::kFf1], &p_[P::kFf1Bias], t.z1.data(), t.a1.data());
    t.f1.resize(d);
    for (std::size_t c = 0; c < d; ++c) t.f1[c] = t.a1[c] > 0.0 ? t.a1[c] : 0.0;
    t.u2.assign(d, 0.0);
    affine(p_[P::kFf2], &p_[P::kFf2Bias], t.f1.data(), t.u2.data());
    for (std::size_t c = 0; c < d; ++c) t.u2[c] += t.z1[c];
    t.z2.assign(d, 0.0);
    layer_norm(t.u2.data(), p_[P::kNorm2Gain], p_[P::kNorm2Bias], t.z2.data(), t.norm2, d);

    t.logit = simd::dot(p_[P::kHead].data, t.z2) + p_[P::kHeadBias].data[0];
  }

  // Accumulates parameter gradients for one target given dL/dlogit. Key and
  // value gradients w.r.t. the per-position projections go to dkey/dvalue
  // (laid out like Projected) and to the shared distance/start buffers.
  void backward(const StudentSequence& seq, const Projected& pr, std::size_t i, const Target& t,
                double dlogit, TensorList& g, std::vector<double>& dkey, std::vector<double>& dvalue,
                Shared& dshared) const {
    const std::size_t d = d_;
    const std::size_t dh = d / heads_;
    const SkillId skill = seq.records[i].skill;
    std::vector<double> dz2(d), du2(d), df1(d), dz1(d), du1(d), dcontext(d), dq(d), tmp(d);

    simd::axpy(dlogit, t.z2, g[P::kHead].data);
    g[P::kHeadBias].data[0] += dlogit;
    simd::axpy(dlogit, p_[P::kHead].data, dz2);

    layer_norm_backward(dz2.data(), p_[P::kNorm2Gain], t.norm2, g[P::kNorm2Gain],
                        g[P::kNorm2Bias], du2.data(), d);
    // u2 = W2 f1 + b2 + z1
    simd::ger(1.0, du2.data(), d, t.f1.data(), d, g[P::kFf2].data.data());
    simd::axpy(1.0, du2, g[P::kFf2Bias].data);
    simd::gemv_t(p_[P::kFf2].data.data(), d, d, du2.data(), df1.data());
    for (std::size_t c = 0; c < d; ++c) df1[c] = t.a1[c] > 0.0 ? df1[c] : 0.0;
    simd::ger(1.0, df1.data(), d, t.z1.data(), d, g[P::kFf1].data.data());
    simd::axpy(1.0, df1, g[P::kFf1Bias].data);
    dz1 = du2;
    simd::gemv_t(p_[P::kFf1].data.data(), d, d, df1.data(), dz1.data());

    layer_norm_backward(dz1.data(), p_[P::kNorm1Gain], t.norm1, g[P::kNorm1Gain],
                        g[P::kNorm1Bias], du1.data(), d);
    // u1 = Wo context + bo + skill embedding
    simd::axpy(1.0, du1, g[P::kSkill].row_span(skill));
    simd::ger(1.0, du1.data(), d, t.context.data(), d, g[P::kOut].data.data());
    simd::axpy(1.0, du1, g[P::kOutBias].data);
    simd::gemv_t(p_[P::kOut].data.data(), d, d, du1.data(), dcontext.data());

    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> dweight(t.keys), dscore(t.keys);
    std::vector<double> dkeys(t.keys * d, 0.0), dvalues(t.keys * d, 0.0);
    for (std::size_t h = 0; h < heads_; ++h) {
      const double* w = t.weights.data() + h * t.keys;
      const std::span<const double> dctx(dcontext.data() + h * dh, dh);
      double weighted = 0.0;
      for (std::size_t s = 0; s < t.keys; ++s) {
        dweight[s] = simd::dot(dctx, {t.values_buf.data() + s * d + h * dh, dh});
        weighted += w[s] * dweight[s];
        simd::axpy(w[s], dctx, {dvalues.data() + s * d + h * dh, dh});
      }
      for (std::size_t s = 0; s < t.keys; ++s) {
        dscore[s] = w[s] * (dweight[s] - weighted) * scale;
        simd::axpy(dscore[s], {t.keys_buf.data() + s * d + h * dh, dh}, {dq.data() + h * dh, dh});
        simd::axpy(dscore[s], {t.query.data() + h * dh, dh}, {dkeys.data() + s * d + h * dh, dh});
      }
    }

    for (std::size_t s = 0; s < t.keys; ++s) {
      const std::span<const double> dk(dkeys.data() + s * d, d);
      const std::span<const double> dv(dvalues.data() + s * d, d);
      std::size_t distance = 0;
      if (s == 0) {
        simd::axpy(1.0, dk, dshared.start_key);
        simd::axpy(1.0, dv, dshared.start_value);
      } else {
        const std::size_t j = t.first_visible + s - 1;
        simd::axpy(1.0, dk, {dkey.data() + (j - pr.first) * d, d});
        simd::axpy(1.0, dv, {dvalue.data() + (j - pr.first) * d, d});
        distance = i - j;
      }
      simd::axpy(1.0, dk, {dshared.dist_key.data() + distance * d, d});
      simd::axpy(1.0, dv, {dshared.dist_value.data() + distance * d, d});
      simd::axpy(1.0, dk, g[P::kKeyBias].data);
      simd::axpy(1.0, dv, g[P::kValueBias].data);
    }

    // query = Wq skill_embedding + bq
    simd::ger(1.0, dq.data(), d, p_[P::kSkill].row(skill), d, g[P::kQuery].data.data());
    simd::axpy(1.0, dq, g[P::kQueryBias].data);
    std::fill(tmp.begin(), tmp.end(), 0.0);
    simd::gemv_t(p_[P::kQuery].data.data(), d, d, dq.data(), tmp.data());
    simd::axpy(1.0, tmp, g[P::kSkill].row_span(skill));
  }

  // Pushes gradients of x -> W x back to W and to the embedding row x.
  void project_backward(P weight, const double* dy, const double* x, Tensor& dx_row_owner,
                        std::size_t row, TensorList& g) const {
    simd::ger(1.0, dy, d_, x, d_, g[weight].data.data());
    simd::gemv_t(p_[weight].data.data(), d_, d_, dy, dx_row_owner.row(row));
  }

  std::size_t dim() const { return d_; }
  std::size_t window() const { return window_; }

 private:
  const SaktModel& m_;
  const TensorList& p_;
  std::size_t d_;
  std::size_t heads_;
  std::size_t window_;
  Shared shared_;
};

}  // namespace

SaktModel init_sakt(std::size_t n_skills, std::vector<std::string> skill_names,
                    const SaktConfig& config) {
  if (n_skills == 0) throw DataError("SAKT needs a non-empty skill vocabulary");
  if (config.embed_dim == 0 || config.num_heads == 0 || config.embed_dim % config.num_heads != 0) {
    throw ConfigError("SAKT embed_dim must be a positive multiple of num_heads");
  }
  if (config.window < 2) throw ConfigError("SAKT window must be >= 2");
  const std::size_t d = config.embed_dim;
  SaktModel m;
  m.config = config;
  m.num_skills = n_skills;
  m.skill_names = std::move(skill_names);
  auto& p = m.params;
  p.emplace_back("interaction", 2 * n_skills, d);
  p.emplace_back("start", 1, d);
  p.emplace_back("distance", config.window, d);
  p.emplace_back("skill", n_skills, d);
  p.emplace_back("query", d, d);
  p.emplace_back("query_bias", 1, d);
  p.emplace_back("key", d, d);
  p.emplace_back("key_bias", 1, d);
  p.emplace_back("value", d, d);
  p.emplace_back("value_bias", 1, d);
  p.emplace_back("out", d, d);
  p.emplace_back("out_bias", 1, d);
  p.emplace_back("norm1_gain", 1, d);
  p.emplace_back("norm1_bias", 1, d);
  p.emplace_back("ff1", d, d);
  p.emplace_back("ff1_bias", 1, d);
  p.emplace_back("ff2", d, d);
  p.emplace_back("ff2_bias", 1, d);
  p.emplace_back("norm2_gain", 1, d);
  p.emplace_back("norm2_bias", 1, d);
  p.emplace_back("head", 1, d);
  p.emplace_back("head_bias", 1, 1);

  Rng rng(config.train.seed);
  const double limit = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto k : {P::kInteraction, P::kStart, P::kDistance, P::kSkill, P::kQuery, P::kKey, P::kValue,
                 P::kOut, P::kFf1, P::kFf2}) {
    init_uniform(p[k], rng, limit);
  }
  std::fill(p[P::kNorm1Gain].data.begin(), p[P::kNorm1Gain].data.end(), 1.0);
  std::fill(p[P::kNorm2Gain].data.begin(), p[P::kNorm2Gain].data.end(), 1.0);
  return m;
}

double sakt_loss(const SaktModel& model, const TensorList& params,
                 std::span<const SequenceSlice> slices, TensorList* grads) {
  std::size_t targets = 0;
  for (const auto& s : slices) targets += s.end - s.begin;
  if (targets == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(targets);
  if (grads) set_zero(*grads);

  Evaluator ev(model, params);
  const std::size_t d = ev.dim();
  const std::size_t window = ev.window();
  Shared dshared;
  dshared.dist_key.assign(window * d, 0.0);
  dshared.dist_value.assign(window * d, 0.0);
  dshared.start_key.assign(d, 0.0);
  dshared.start_value.assign(d, 0.0);

  Target t;
  double loss = 0.0;
  for (const auto& slice : slices) {
    const auto& seq = *slice.sequence;
    const std::size_t first = slice.begin >= window - 1 ? slice.begin - (window - 1) : 0;
    const std::size_t last = slice.end - 1;  // the last target's own record is never a key
    const auto pr = project_positions(params, seq, first, std::max(first, last), model.num_skills, d);
    std::vector<double> dkey(pr.key.size(), 0.0), dvalue(pr.value.size(), 0.0);
    for (std::size_t i = slice.begin; i < slice.end; ++i) {
      ev.forward(seq, pr, i, t);
      const double y = seq.records[i].correct;
      loss += softplus(t.logit) - y * t.logit;
      if (grads) {
        ev.backward(seq, pr, i, t, (sigmoid(t.logit) - y) * inv, *grads, dkey, dvalue, dshared);
      }
    }
    if (!grads) continue;
    for (std::size_t m = 0; m * d < pr.key.size(); ++m) {
      const std::size_t row = interaction_index(seq.records[first + m], model.num_skills);
      const double* e = params[P::kInteraction].row(row);
      ev.project_backward(P::kKey, dkey.data() + m * d, e, (*grads)[P::kInteraction], row, *grads);
      ev.project_backward(P::kValue, dvalue.data() + m * d, e, (*grads)[P::kInteraction], row,
                          *grads);
    }
  }
  if (grads) {
    auto& g = *grads;
    for (std::size_t r = 0; r < window; ++r) {
      const double* e = params[P::kDistance].row(r);
      ev.project_backward(P::kKey, dshared.dist_key.data() + r * d, e, g[P::kDistance], r, g);
      ev.project_backward(P::kValue, dshared.dist_value.data() + r * d, e, g[P::kDistance], r, g);
    }
    const double* s = params[P::kStart].row(0);
    ev.project_backward(P::kKey, dshared.start_key.data(), s, g[P::kStart], 0, g);
    ev.project_backward(P::kValue, dshared.start_value.data(), s, g[P::kStart], 0, g);
  }
  return loss * inv;
}

SaktModel fit_sakt(const Dataset& train, const SaktConfig& config) {
  SaktModel model = init_sakt(train.num_skills(), train.skill_vocab, config);
  auto slices = chunk_sequences(train, config.window);
  model.summary = train_slices(
      model.params, std::move(slices), config.train,
      [&](const TensorList& params, std::span<const SequenceSlice> batch, TensorList& grads) {
        return sakt_loss(model, params, batch, &grads);
      });
  return model;
}

std::vector<Prediction> sakt_predict_sequence(const SaktModel& model, const StudentSequence& seq) {
  std::vector<Prediction> out;
  const std::size_t n = seq.records.size();
  if (n == 0) return out;
  out.reserve(n);
  Evaluator ev(model, model.params);
  const auto pr =
      project_positions(model.params, seq, 0, n - 1, model.num_skills, model.config.embed_dim);
  Target t;
  for (std::size_t i = 0; i < n; ++i) {
    ev.forward(seq, pr, i, t);
    out.push_back(make_prediction(sigmoid(t.logit)));
  }
  return out;
}

std::vector<std::vector<double>> sakt_attention_weights(const SaktModel& model,
                                                        const StudentSequence& seq, std::size_t i) {
  if (i >= seq.records.size()) throw std::out_of_range("attention query outside sequence");
  Evaluator ev(model, model.params);
  const std::size_t first = i >= model.config.window - 1 ? i - (model.config.window - 1) : 0;
  const auto pr = project_positions(model.params, seq, first, std::max(first, i), model.num_skills,
                                    model.config.embed_dim);
  Target t;
  ev.forward(seq, pr, i, t);
  std::vector<std::vector<double>> rows;
  for (std::size_t h = 0; h < model.config.num_heads; ++h) {
    rows.emplace_back(t.weights.begin() + h * t.keys, t.weights.begin() + (h + 1) * t.keys);
  }
  return rows;
}

void save_sakt(const SaktModel& model, std::ostream& out) {
  Checkpoint ckpt;
  ckpt.kind = "sakt";
  ckpt.meta["embed_dim"] = std::to_string(model.config.embed_dim);
  ckpt.meta["num_heads"] = std::to_string(model.config.num_heads);
  ckpt.meta["window"] = std::to_string(model.config.window);
  ckpt.meta["num_skills"] = std::to_string(model.num_skills);
  ckpt.vocab = model.skill_names;
  ckpt.tensors = model.params;
  save_checkpoint(ckpt, out);
}

SaktModel load_sakt(std::istream& in) {
  auto ckpt = load_checkpoint(in);
  if (ckpt.kind != "sakt") throw DataError("checkpoint holds '" + ckpt.kind + "', expected sakt");
  SaktConfig config;
  try {
    config.embed_dim = std::stoul(ckpt.meta.at("embed_dim"));
    config.num_heads = std::stoul(ckpt.meta.at("num_heads"));
    config.window = std::stoul(ckpt.meta.at("window"));
  } catch (const std::exception&) {
    throw DataError("SAKT checkpoint missing shape metadata");
  }
  SaktModel m = init_sakt(ckpt.vocab.size(), ckpt.vocab, config);
  if (ckpt.tensors.size() != m.params.size()) throw DataError("SAKT checkpoint tensor count mismatch");
  for (std::size_t k = 0; k < m.params.size(); ++k) {
    const auto& t = ckpt.tensors[k];
    if (t.name != m.params[k].name || t.rows != m.params[k].rows || t.cols != m.params[k].cols) {
      throw DataError("SAKT checkpoint tensor '" + t.name + "' has unexpected shape");
    }
  }
  m.params = std::move(ckpt.tensors);
  return m;
}

}  // namespace kt::nn
