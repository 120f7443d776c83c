#include "kt/neural/checkpoint.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "kt/error.hpp"
#include "kt/text_io.hpp"

namespace kt::nn {

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  out << "kt-checkpoint 1\n";
  out << "kind " << ckpt.kind << '\n';
  for (const auto& [key, value] : ckpt.meta) out << "meta " << key << ' ' << value << '\n';
  out << "vocab " << ckpt.vocab.size() << '\n';
  for (const auto& name : ckpt.vocab) out << name << '\n';
  for (const auto& t : ckpt.tensors) {
    out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t c = 0; c < t.cols; ++c) {
        if (c) out << ' ';
        out << format_double(t.row(r)[c]);
      }
      out << '\n';
    }
  }
  out << "end\n";
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "kt-checkpoint 1") throw DataError("not a checkpoint file");
  Checkpoint ckpt;
  bool ended = false;
  while (!ended && std::getline(in, line)) {
    std::istringstream row(line);
    std::string tag;
    row >> tag;
    if (tag == "kind") {
      row >> ckpt.kind;
    } else if (tag == "meta") {
      std::string key, value;
      row >> key;
      std::getline(row >> std::ws, value);
      ckpt.meta[key] = value;
    } else if (tag == "vocab") {
      std::size_t n = 0;
      row >> n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw DataError("truncated checkpoint vocabulary");
        ckpt.vocab.push_back(line);
      }
    } else if (tag == "tensor") {
      Tensor t;
      if (!(row >> t.name >> t.rows >> t.cols)) throw DataError("malformed tensor header");
      t.data.resize(t.rows * t.cols);
      for (auto& v : t.data) {
        std::string token;
        if (!(in >> token)) throw DataError("truncated tensor '" + t.name + "'");
        v = parse_double(token);
      }
      std::getline(in, line);
      ckpt.tensors.push_back(std::move(t));
    } else if (tag == "end") {
      ended = true;
    } else if (!tag.empty()) {
      throw DataError("unexpected checkpoint entry '" + tag + "'");
    }
  }
  if (!ended) throw DataError("checkpoint missing end marker");
  return ckpt;
}

}  // namespace kt::nn
