#include "kt/bkt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "kt/error.hpp"
#include "kt/rng.hpp"
#include "kt/text_io.hpp"

namespace kt {

bool is_valid(const BktParams& p) {
  for (double v : {p.p_init, p.p_learn, p.p_guess, p.p_slip}) {
    if (!(v >= kBktEpsilon && v <= 1.0 - kBktEpsilon)) return false;
  }
  return p.p_guess <= kBktMaxGuessSlip && p.p_slip <= kBktMaxGuessSlip;
}

BktParams clamp_params(const BktParams& p) {
  auto unit = [](double v) { return std::clamp(v, kBktEpsilon, 1.0 - kBktEpsilon); };
  return BktParams{unit(p.p_init), unit(p.p_learn), std::min(unit(p.p_guess), kBktMaxGuessSlip),
                   std::min(unit(p.p_slip), kBktMaxGuessSlip)};
}

const BktParams& BktModel::params_for(SkillId skill) const {
  auto it = per_skill.find(skill);
  return it == per_skill.end() ? default_params : it->second;
}

Prediction bkt_predict(const BktState& state, const BktParams& params) {
  const double p = state.p_know * (1.0 - params.p_slip) + (1.0 - state.p_know) * params.p_guess;
  return make_prediction(std::clamp(p, 0.0, 1.0));
}

BktState bkt_update(const BktState& state, const BktParams& params, Label observed) {
  const double k = state.p_know;
  double known_and_obs = 0.0;
  double unknown_and_obs = 0.0;
  if (observed == Label::kCorrect) {
    known_and_obs = k * (1.0 - params.p_slip);
    unknown_and_obs = (1.0 - k) * params.p_guess;
  } else {
    known_and_obs = k * params.p_slip;
    unknown_and_obs = (1.0 - k) * (1.0 - params.p_guess);
  }
  const double evidence = known_and_obs + unknown_and_obs;
  if (!(evidence > 0.0)) {
    throw ModelError("BKT observation has zero probability under the current parameters");
  }
  const double posterior = known_and_obs / evidence;
  return BktState{std::clamp(posterior + (1.0 - posterior) * params.p_learn, 0.0, 1.0)};
}

namespace {

struct EmStatistics {
  double init_known = 0.0;
  double n_sequences = 0.0;
  double learn_num = 0.0;
  double learn_den = 0.0;
  double guess_num = 0.0;
  double unknown_mass = 0.0;
  double slip_num = 0.0;
  double known_mass = 0.0;
  double log_likelihood = 0.0;
  // Neumaier compensation; near convergence EM gains are below the
  // rounding error of a plain running sum.
  double log_likelihood_carry = 0.0;

  void add_log(double v) {
    const double t = log_likelihood + v;
    log_likelihood_carry += std::abs(log_likelihood) >= std::abs(v) ? (log_likelihood - t) + v
                                                                    : (v - t) + log_likelihood;
    log_likelihood = t;
  }
  double total_log_likelihood() const { return log_likelihood + log_likelihood_carry; }
};

// Emission probability of `obs` in state 0 (unknown) and 1 (known).
std::array<double, 2> emission(const BktParams& p, std::uint8_t obs) {
  return obs ? std::array{p.p_guess, 1.0 - p.p_slip} : std::array{1.0 - p.p_guess, p.p_slip};
}

// Scaled forward-backward over one sequence, accumulating expected counts.
void accumulate(const std::vector<std::uint8_t>& obs, const BktParams& p, EmStatistics& s,
                std::vector<std::array<double, 2>>& alpha, std::vector<double>& scale) {
  const std::size_t n = obs.size();
  if (n == 0) return;
  alpha.resize(n);
  scale.resize(n);

  auto e = emission(p, obs[0]);
  alpha[0] = {(1.0 - p.p_init) * e[0], p.p_init * e[1]};
  for (std::size_t t = 0;; ++t) {
    scale[t] = alpha[t][0] + alpha[t][1];
    alpha[t][0] /= scale[t];
    alpha[t][1] /= scale[t];
    s.add_log(std::log(scale[t]));
    if (t + 1 == n) break;
    e = emission(p, obs[t + 1]);
    alpha[t + 1] = {alpha[t][0] * (1.0 - p.p_learn) * e[0],
                    (alpha[t][0] * p.p_learn + alpha[t][1]) * e[1]};
  }

  std::array<double, 2> beta{1.0, 1.0};
  for (std::size_t t = n; t-- > 0;) {
    const double g0 = alpha[t][0] * beta[0];
    const double g1 = alpha[t][1] * beta[1];
    if (obs[t]) s.guess_num += g0; else s.slip_num += g1;
    s.unknown_mass += g0;
    s.known_mass += g1;
    if (t == 0) {
      s.init_known += g1;
      break;
    }
    // xi(0 -> 1) between t-1 and t, then step beta back to t-1.
    const auto en = emission(p, obs[t]);
    s.learn_num += alpha[t - 1][0] * p.p_learn * en[1] * beta[1] / scale[t];
    s.learn_den += alpha[t - 1][0] * (1.0 - p.p_learn) * en[0] * beta[0] / scale[t] +
                   alpha[t - 1][0] * p.p_learn * en[1] * beta[1] / scale[t];
    beta = {((1.0 - p.p_learn) * en[0] * beta[0] + p.p_learn * en[1] * beta[1]) / scale[t],
            en[1] * beta[1] / scale[t]};
  }
  s.n_sequences += 1.0;
}

EmStatistics expectation(const std::vector<std::vector<std::uint8_t>>& sequences,
                         const BktParams& p) {
  EmStatistics s;
  std::vector<std::array<double, 2>> alpha;
  std::vector<double> scale;
  for (const auto& obs : sequences) accumulate(obs, p, s, alpha, scale);
  return s;
}

BktParams maximization(const EmStatistics& s, const BktParams& previous) {
  auto ratio = [](double num, double den, double fallback) { return den > 0.0 ? num / den : fallback; };
  BktParams next;
  next.p_init = ratio(s.init_known, s.n_sequences, previous.p_init);
  next.p_learn = ratio(s.learn_num, s.learn_den, previous.p_learn);
  next.p_guess = ratio(s.guess_num, s.unknown_mass, previous.p_guess);
  next.p_slip = ratio(s.slip_num, s.known_mass, previous.p_slip);
  // Each expected-log-likelihood term is concave in its own parameter, so
  // projecting onto the box is the constrained maximizer and EM stays
  // monotone.
  return clamp_params(next);
}

}  // namespace

double bkt_log_likelihood(const std::vector<std::vector<std::uint8_t>>& sequences,
                          const BktParams& params) {
  return expectation(sequences, params).total_log_likelihood();
}

EmTrace run_em(const std::vector<std::vector<std::uint8_t>>& sequences, BktParams start,
               int max_iterations, double tolerance) {
  EmTrace trace;
  BktParams current = clamp_params(start);
  for (int it = 0;; ++it) {
    const auto stats = expectation(sequences, current);
    const double ll = stats.total_log_likelihood();
    if (!std::isfinite(ll)) throw ModelError("non-finite BKT log-likelihood");
    trace.log_likelihood.push_back(ll);
    const auto k = trace.log_likelihood.size();
    if (k > 1 && trace.log_likelihood[k - 1] - trace.log_likelihood[k - 2] < tolerance) {
      trace.converged = true;
      break;
    }
    if (it == max_iterations) break;
    current = maximization(stats, current);
  }
  trace.params = current;
  return trace;
}

BktParams fit_bkt_skill(const std::vector<std::vector<std::uint8_t>>& sequences,
                        const BktFitConfig& config, std::uint64_t stream) {
  Rng rng(derive_seed(config.seed, stream));
  BktParams best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(config.restarts, 1); ++r) {
    BktParams start{rng.uniform(0.2, 0.6), rng.uniform(0.2, 0.6), rng.uniform(0.05, 0.3),
                    rng.uniform(0.05, 0.3)};
    const auto trace = run_em(sequences, start, config.max_iterations, config.tolerance);
    if (trace.log_likelihood.back() > best_ll) {
      best_ll = trace.log_likelihood.back();
      best = trace.params;
    }
  }
  return best;
}

BktModel fit_bkt(const Dataset& train, const BktFitConfig& config) {
  const std::size_t n_skills = train.num_skills();
  // Per skill, one observation sequence per student who practised it.
  std::vector<std::vector<std::vector<std::uint8_t>>> by_skill(n_skills);
  std::vector<std::size_t> counts(n_skills, 0);
  for (const auto& seq : train.sequences) {
    std::unordered_map<SkillId, std::size_t> slot;
    for (const auto& r : seq.records) {
      auto [it, inserted] = slot.try_emplace(r.skill, by_skill[r.skill].size());
      if (inserted) by_skill[r.skill].emplace_back();
      by_skill[r.skill][it->second].push_back(r.correct);
      ++counts[r.skill];
    }
  }

  std::vector<std::vector<std::uint8_t>> pooled;
  for (const auto& skill : by_skill) pooled.insert(pooled.end(), skill.begin(), skill.end());
  if (pooled.empty()) throw DataError("cannot fit BKT on an empty training set");

  BktModel model;
  model.skill_names = train.skill_vocab;
  model.default_params = fit_bkt_skill(pooled, config, n_skills);
  for (SkillId k = 0; k < n_skills; ++k) {
    if (counts[k] < config.min_observations) continue;
    try {
      model.per_skill[k] = fit_bkt_skill(by_skill[k], config, k);
    } catch (const ModelError& e) {
      spdlog::warn("BKT fit for skill '{}' failed ({}); using pooled parameters",
                   train.skill_vocab[k], e.what());
    }
  }
  return model;
}

std::vector<Prediction> bkt_predict_sequence(const BktModel& model, const StudentSequence& seq) {
  std::vector<Prediction> out;
  out.reserve(seq.records.size());
  std::unordered_map<SkillId, BktState> states;
  for (const auto& r : seq.records) {
    const auto& params = model.params_for(r.skill);
    auto [it, inserted] = states.try_emplace(r.skill, BktState{params.p_init});
    out.push_back(bkt_predict(it->second, params));
    it->second = bkt_update(it->second, params, r.correct ? Label::kCorrect : Label::kWrong);
  }
  return out;
}

namespace {

void write_params(std::ostream& out, const BktParams& p) {
  out << format_double(p.p_init) << ' ' << format_double(p.p_learn) << ' '
      << format_double(p.p_guess) << ' ' << format_double(p.p_slip) << '\n';
}

BktParams read_params(std::istream& in) {
  std::string a, b, c, d;
  if (!(in >> a >> b >> c >> d)) throw DataError("truncated BKT parameter row");
  BktParams p{parse_double(a), parse_double(b), parse_double(c), parse_double(d)};
  if (!is_valid(p)) throw DataError("BKT parameters outside the valid range");
  return p;
}

}  // namespace

void save_bkt(const BktModel& model, std::ostream& out) {
  out << "kt-bkt 1\n";
  out << "vocab " << model.skill_names.size() << '\n';
  for (const auto& name : model.skill_names) out << name << '\n';
  out << "default ";
  write_params(out, model.default_params);
  for (const auto& [skill, p] : model.per_skill) {
    out << "skill " << skill << ' ';
    write_params(out, p);
  }
}

BktModel load_bkt(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "kt-bkt 1") throw DataError("not a BKT model file");
  BktModel model;
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "vocab") throw DataError("BKT model missing vocabulary");
  std::getline(in, line);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw DataError("truncated BKT vocabulary");
    model.skill_names.push_back(line);
  }
  bool have_default = false;
  while (in >> tag) {
    if (tag == "default") {
      model.default_params = read_params(in);
      have_default = true;
    } else if (tag == "skill") {
      SkillId k = 0;
      if (!(in >> k) || k >= n) throw DataError("BKT skill index out of range");
      model.per_skill[k] = read_params(in);
    } else {
      throw DataError("unexpected BKT model entry '" + tag + "'");
    }
  }
  if (!have_default) throw DataError("BKT model missing default parameters");
  return model;
}

}  // namespace kt
