#pragma once

#include <cstddef>
#include <vector>

#include "hfe/ops.hpp"
#include "hfe/random.hpp"

namespace hfe {

struct ConvParams {
  Tensor w;  // (out, in, k, k)
  Tensor b;  // (out, 1, 1, 1)

  void append_to(std::vector<Tensor>& out) const { out.insert(out.end(), {w, b}); }
  std::size_t kernel() const { return w.shape().h; }
};

// Kaiming-initialised weight, zero bias, both trainable.
ConvParams make_conv(std::size_t out_ch, std::size_t in_ch, std::size_t k,
                     Rng& rng);
ConvParams make_zero_conv(std::size_t out_ch, std::size_t in_ch, std::size_t k);

// "Same" padding for odd kernels at the given stride.
Tensor apply_conv(const Tensor& x, const ConvParams& p, std::size_t stride = 1);

}  // namespace hfe
