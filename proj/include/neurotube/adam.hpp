#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "neurotube/tensor.hpp"

namespace neurotube {

struct AdamState {
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // One moment buffer per parameter, in the order passed to adam_step.
  std::vector<std::vector<real>> m;
  std::vector<std::vector<real>> v;
};

/// Bias-corrected ADAM update. Every parameter must carry a gradient;
/// gradients are zeroed after the update is applied.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace neurotube
