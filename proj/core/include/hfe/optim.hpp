#pragma once

#include <cstdint>
#include <vector>

#include "hfe/tensor.hpp"

namespace hfe {

struct AdamHyper {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Moments for a fixed, ordered parameter list.
struct AdamState {
  AdamHyper hyper;
  std::uint64_t t = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  static AdamState for_params(const std::vector<Tensor>& params,
                              AdamHyper hyper = {});
};

// One bias-corrected Adam update, in place. Uses state.hyper.lr.
void adam_step(std::vector<Tensor>& params, AdamState& state);

// base_lr * 0.99^floor(step / 1000)
double lr_schedule(double base_lr, std::uint64_t step, double decay = 0.99,
                   std::uint64_t every = 1000);

}  // namespace hfe
