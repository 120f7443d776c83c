#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kt/rng.hpp"

namespace kt::nn {

/// Named row-major matrix of doubles. Vectors are 1 x n.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), rows(rows), cols(cols), data(rows * cols, 0.0) {}

  std::size_t size() const { return data.size(); }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  std::span<double> row_span(std::size_t r) { return {row(r), cols}; }
  std::span<const double> row_span(std::size_t r) const { return {row(r), cols}; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using TensorList = std::vector<Tensor>;

TensorList zeros_like(const TensorList& params);
void set_zero(TensorList& tensors);
double global_norm(const TensorList& tensors);
void scale(TensorList& tensors, double factor);
bool all_finite(const TensorList& tensors);
std::size_t parameter_count(const TensorList& tensors);

/// Fills with U(-limit, limit).
void init_uniform(Tensor& t, Rng& rng, double limit);

}  // namespace kt::nn
