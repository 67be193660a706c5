#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "hfe/tensor.hpp"

namespace hfe {

enum class EdgeKernel { kPrewittX, kPrewittY, kLaplacian };

// 3x3 taps, row-major. Prewitt is scaled by 1/3, the Laplacian by 1/4.
std::array<float, 9> edge_kernel_taps(EdgeKernel kind);

// Fixed-initialised edge detectors at dilations 1, 2, 4, ... Each scale holds
// a (3*in, in, 3, 3) weight; output channel 3*i + k applies kernel k to input
// channel i.
struct EdgeFilterBank {
  std::size_t in_channels = 0;
  std::vector<Tensor> weights;
  std::vector<std::size_t> dilations;
  bool trainable = false;

  std::size_t scales() const { return weights.size(); }
  std::size_t out_channels() const { return scales() * 3 * in_channels; }
};

EdgeFilterBank build_bank(std::size_t in_channels, std::size_t scales,
                          bool trainable);

// Per-scale responses concatenated along channels; same spatial size as img.
Tensor extract_edges(const Tensor& img, const EdgeFilterBank& bank);

}  // namespace hfe
