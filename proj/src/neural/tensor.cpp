#include "kt/neural/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace kt::nn {

TensorList zeros_like(const TensorList& params) {
  TensorList out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.name, p.rows, p.cols);
  return out;
}

void set_zero(TensorList& tensors) {
  for (auto& t : tensors) std::fill(t.data.begin(), t.data.end(), 0.0);
}

double global_norm(const TensorList& tensors) {
  double s = 0.0;
  for (const auto& t : tensors) {
    for (double v : t.data) s += v * v;
  }
  return std::sqrt(s);
}

void scale(TensorList& tensors, double factor) {
  for (auto& t : tensors) {
    for (double& v : t.data) v *= factor;
  }
}

bool all_finite(const TensorList& tensors) {
  for (const auto& t : tensors) {
    for (double v : t.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::size_t parameter_count(const TensorList& tensors) {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

void init_uniform(Tensor& t, Rng& rng, double limit) {
  for (double& v : t.data) v = rng.uniform(-limit, limit);
}

}  // namespace kt::nn
