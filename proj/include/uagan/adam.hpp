#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uagan/tensor.hpp"

namespace uagan {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one per parameter tensor.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(std::span<const Tensor> params);

// Bias-corrected Adam update applied in place. Shapes of params, grads and
// the state buffers must agree pairwise.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads,
               AdamState& state, const AdamConfig& config);

}  // namespace uagan
