#include "hfe/layers.hpp"

namespace hfe {

ConvParams make_zero_conv(std::size_t out_ch, std::size_t in_ch,
                          std::size_t k) {
  return {Tensor::zeros({out_ch, in_ch, k, k}, true),
          Tensor::zeros({out_ch, 1, 1, 1}, true)};
}

ConvParams make_conv(std::size_t out_ch, std::size_t in_ch, std::size_t k,
                     Rng& rng) {
  ConvParams p = make_zero_conv(out_ch, in_ch, k);
  kaiming_uniform(p.w, rng);
  return p;
}

Tensor apply_conv(const Tensor& x, const ConvParams& p, std::size_t stride) {
  return ops::conv2d(x, p.w, p.b,
                     {.stride = stride, .padding = p.kernel() / 2, .dilation = 1});
}

}  // namespace hfe
