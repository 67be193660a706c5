#include "hfe/random.hpp"

#include <cmath>

namespace hfe {

Rng derive_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), 0x48464145u};
  return Rng(seq);
}

void uniform_fill(Tensor& t, float lo, float hi, Rng& rng) {
  std::uniform_real_distribution<float> dist(lo, hi);
  for (float& v : t.mutable_data()) v = dist(rng);
}

void kaiming_uniform(Tensor& weight, Rng& rng) {
  const Shape& s = weight.shape();
  const double fan_in = static_cast<double>(s.c * s.h * s.w);
  const float bound = static_cast<float>(std::sqrt(6.0 / fan_in));
  uniform_fill(weight, -bound, bound, rng);
}

}  // namespace hfe
