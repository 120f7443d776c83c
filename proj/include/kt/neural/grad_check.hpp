#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kt/neural/tensor.hpp"

namespace kt::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
  bool finite = true;
};

inline constexpr std::size_t kGradCheckMaxParameters = 5000;

/// Relative error |a - n| / max(|a|, |n|), with the denominator floored so
/// that entries whose gradient is numerically zero compare absolutely.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares the analytic gradient of `loss(params, grads*)` with central
/// differences of step h, parameter by parameter. `loss` must fill grads
/// when given a non-null pointer and leave it alone otherwise.
template <class Loss>
GradCheckResult grad_check(TensorList params, Loss&& loss, double h) {
  GradCheckResult result;
  result.parameters = parameter_count(params);
  if (result.parameters > kGradCheckMaxParameters) {
    throw std::invalid_argument("model too large for a finite-difference gradient check");
  }
  TensorList analytic = zeros_like(params);
  loss(params, &analytic);
  result.finite = all_finite(analytic);
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      double& w = params[k].data[i];
      const double saved = w;
      w = saved + h;
      const double up = loss(params, nullptr);
      w = saved - h;
      const double down = loss(params, nullptr);
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      result.finite = result.finite && std::isfinite(numeric);
      result.max_relative_error =
          std::max(result.max_relative_error, relative_error(analytic[k].data[i], numeric));
    }
  }
  return result;
}

}  // namespace kt::nn
