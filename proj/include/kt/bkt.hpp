#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "kt/types.hpp"

namespace kt {

/// Four per-skill parameters of the two-state knowledge HMM.
struct BktParams {
  double p_init = 0.3;   // known before the first attempt
  double p_learn = 0.2;  // unknown -> known after an attempt
  double p_guess = 0.1;  // correct while unknown
  double p_slip = 0.1;   // wrong while known

  friend bool operator==(const BktParams&, const BktParams&) = default;
};

inline constexpr double kBktEpsilon = 1e-6;
inline constexpr double kBktMaxGuessSlip = 0.5;

bool is_valid(const BktParams& p);
/// Projects onto [eps, 1 - eps] with guess and slip capped at 0.5.
BktParams clamp_params(const BktParams& p);

struct BktState {
  double p_know = 0.0;
};

struct BktModel {
  std::map<SkillId, BktParams> per_skill;
  BktParams default_params;
  /// Skill vocabulary the model was fitted against (names by dense id).
  std::vector<std::string> skill_names;

  const BktParams& params_for(SkillId skill) const;
};

struct BktFitConfig {
  int restarts = 3;
  int max_iterations = 100;
  double tolerance = 1e-6;
  std::size_t min_observations = 10;
  std::uint64_t seed = 0;
};

/// Diagnostics of one EM run; log_likelihood[k] is the training
/// log-likelihood under the parameters entering iteration k.
struct EmTrace {
  std::vector<double> log_likelihood;
  BktParams params;
  bool converged = false;
};

Prediction bkt_predict(const BktState& state, const BktParams& params);

/// Bayes posterior on the observation followed by the learning transition.
/// Throws ModelError when the observation has zero probability.
BktState bkt_update(const BktState& state, const BktParams& params, Label observed);

/// One Baum-Welch run from a fixed starting point over per-student
/// observation sequences of a single skill.
EmTrace run_em(const std::vector<std::vector<std::uint8_t>>& sequences, BktParams start,
               int max_iterations, double tolerance);

/// Scaled-forward log-likelihood of the observation sequences.
double bkt_log_likelihood(const std::vector<std::vector<std::uint8_t>>& sequences,
                          const BktParams& params);

BktParams fit_bkt_skill(const std::vector<std::vector<std::uint8_t>>& sequences,
                        const BktFitConfig& config, std::uint64_t stream);

BktModel fit_bkt(const Dataset& train, const BktFitConfig& config = {});

std::vector<Prediction> bkt_predict_sequence(const BktModel& model, const StudentSequence& seq);

void save_bkt(const BktModel& model, std::ostream& out);
BktModel load_bkt(std::istream& in);

}  // namespace kt
