#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kt/neural/tensor.hpp"
#include "kt/neural/training.hpp"
#include "kt/types.hpp"

namespace kt::nn {

struct DktConfig {
  std::size_t hidden_size = 100;
  /// Sequences are cut into windows of this many steps; state resets per window.
  std::size_t max_seq_len = 200;
  TrainOptions train;
};

/// LSTM over (skill, correctness) one-hots with one sigmoid output per skill.
///
/// Prediction for step i reads the output unit of skill K_i from the state
/// reached after consuming records [window start, i); the first step of a
/// window reads the zero initial state.
struct DktModel {
  enum Param : std::size_t { kInput, kRecurrent, kBias, kOutput, kOutputBias, kParamCount };

  DktConfig config;
  std::size_t num_skills = 0;
  std::vector<std::string> skill_names;
  /// input [2N x 4H], recurrent [4H x H], bias [1 x 4H], output [N x H],
  /// output_bias [1 x N]. Gate blocks are ordered input, forget, cell, output.
  TensorList params;
  TrainingSummary summary;
};

/// Index of the hot entry of the 2N-wide input: skill + correct * N.
std::size_t dkt_input_index(const InteractionRecord& record, std::size_t n_skills);
std::vector<double> encode_dkt_input(const InteractionRecord& record, std::size_t n_skills);

/// Random recurrent weights, zero output layer, forget-gate bias 1.
DktModel init_dkt(std::size_t n_skills, std::vector<std::string> skill_names,
                  const DktConfig& config);

/// Mean binary cross-entropy over the slices' targets; fills grads if given.
double dkt_loss(const DktModel& model, const TensorList& params,
                std::span<const SequenceSlice> slices, TensorList* grads);

DktModel fit_dkt(const Dataset& train, const DktConfig& config);

std::vector<Prediction> dkt_predict_sequence(const DktModel& model, const StudentSequence& seq);

/// Output for every skill after consuming `history` from the zero state.
std::vector<double> dkt_skill_probabilities(const DktModel& model,
                                            std::span<const InteractionRecord> history);

void save_dkt(const DktModel& model, std::ostream& out);
DktModel load_dkt(std::istream& in);

}  // namespace kt::nn
