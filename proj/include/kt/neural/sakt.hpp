#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kt/neural/tensor.hpp"
#include "kt/neural/training.hpp"
#include "kt/types.hpp"

namespace kt::nn {

struct SaktConfig {
  std::size_t embed_dim = 64;
  std::size_t num_heads = 4;
  /// Keys per query: a learned start slot plus up to window - 1 past
  /// interactions.
  std::size_t window = 200;
  TrainOptions train;
};

/// Single-block self-attentive model.
///
/// For step i the query is the embedding of skill K_i; keys and values are
/// the interaction embeddings (skill x correctness) of records
/// max(0, i - window + 1) .. i - 1 plus a learned start slot, each offset by
/// a learned embedding of its distance to i (the start slot uses distance
/// 0). Attention output passes through residual + layer norm, a ReLU
/// feed-forward block with residual + layer norm, and a one-unit sigmoid
/// head.
struct SaktModel {
  enum Param : std::size_t {
    kInteraction, kStart, kDistance, kSkill,
    kQuery, kQueryBias, kKey, kKeyBias, kValue, kValueBias, kOut, kOutBias,
    kNorm1Gain, kNorm1Bias, kFf1, kFf1Bias, kFf2, kFf2Bias, kNorm2Gain, kNorm2Bias,
    kHead, kHeadBias, kParamCount
  };

  SaktConfig config;
  std::size_t num_skills = 0;
  std::vector<std::string> skill_names;
  TensorList params;
  TrainingSummary summary;
};

SaktModel init_sakt(std::size_t n_skills, std::vector<std::string> skill_names,
                    const SaktConfig& config);

/// Mean binary cross-entropy over the slices' targets; fills grads if given.
double sakt_loss(const SaktModel& model, const TensorList& params,
                 std::span<const SequenceSlice> slices, TensorList* grads);

SaktModel fit_sakt(const Dataset& train, const SaktConfig& config);

std::vector<Prediction> sakt_predict_sequence(const SaktModel& model, const StudentSequence& seq);

/// Attention weights of query i, one row per head; entry 0 is the start
/// slot, entry 1 + m the m-th oldest visible interaction.
std::vector<std::vector<double>> sakt_attention_weights(const SaktModel& model,
                                                        const StudentSequence& seq, std::size_t i);

void save_sakt(const SaktModel& model, std::ostream& out);
SaktModel load_sakt(std::istream& in);

}  // namespace kt::nn
