#pragma once

#include "flowseg/tensor.hpp"

#include <cstdint>
#include <vector>

namespace flowseg {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor> m;  // first moments, zero at step 0
  std::vector<Tensor> v;  // second moments, zero at step 0
  AdamConfig config;
};

AdamState init_adam(const std::vector<Tensor>& params, const AdamConfig& config = {});

// One bias-corrected Adam update in place; increments state.step by 1.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double learning_rate);

}  // namespace flowseg
