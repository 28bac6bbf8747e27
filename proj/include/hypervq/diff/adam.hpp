#pragma once

#include "hypervq/diff/tensor.hpp"

namespace hypervq::diff {

// Bias-corrected Adam over a fixed parameter list; moment buffers are
// allocated lazily to match each parameter.
struct AdamState {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Array> m, v;

  explicit AdamState(double lr = 3e-4) : learning_rate(lr) {}
};

// Applies one update; every parameter must carry a gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);
void clear_grads(std::vector<Tensor>& params);

}  // namespace hypervq::diff
