#pragma once

#include <cstdint>
#include <random>

#include "hfe/tensor.hpp"

namespace hfe {

using Rng = std::mt19937_64;

// Independent stream for (seed, index): lets workers draw samples in any
// order and still reproduce a run.
Rng derive_rng(std::uint64_t seed, std::uint64_t index);

// Kaiming-uniform (fan-in, ReLU gain) initialisation of a conv weight.
void kaiming_uniform(Tensor& weight, Rng& rng);
void uniform_fill(Tensor& t, float lo, float hi, Rng& rng);

}  // namespace hfe
