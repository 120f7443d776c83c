#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "kt/neural/tensor.hpp"

namespace kt::nn {

/// Self-describing text container: model kind, string metadata, the skill
/// vocabulary, and named tensors with shape headers. Values are written in
/// shortest round-trip form, so save/load is exact.
struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> meta;
  std::vector<std::string> vocab;
  TensorList tensors;
};

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint load_checkpoint(std::istream& in);

}  // namespace kt::nn
