#pragma once

#include "kt/neural/tensor.hpp"

namespace kt::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const TensorList& params, AdamConfig config);

  void step(TensorList& params, const TensorList& grads);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  TensorList m_;
  TensorList v_;
  long t_ = 0;
};

}  // namespace kt::nn
