#pragma once

#include <cstddef>
#include <vector>

#include "hfe/tensor.hpp"

// Differentiable tensor operations. Every op records itself on the active
// tape (see TapeScope) when at least one input requires gradients.
namespace hfe::ops {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
};

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               const Conv2dOptions& opt);

// Zero-padded 2-D cross-correlation. weight is (out_ch, in_ch, kh, kw);
// bias, if defined, is any shape with out_ch elements.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dOptions& opt = {});

// Mirrors `pad` pixels onto every side without repeating the edge sample.
Tensor reflect_pad(const Tensor& input, std::size_t pad);

// (N, C*r*r, H, W) -> (N, C, H*r, W*r).
Tensor pixel_shuffle(const Tensor& input, std::size_t r);
// Inverse rearrangement: (N, C, H*r, W*r) -> (N, C*r*r, H, W).
Tensor pixel_unshuffle(const Tensor& input, std::size_t r);

// (N, C, H, W) -> (N, C, 1, 1) spatial mean.
Tensor global_avg_pool(const Tensor& input);

enum class ElementwiseKind { kAdd, kMul, kRelu, kSigmoid, kScale };

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor scale(const Tensor& x, float factor);
// Dispatch form; `b` is ignored by unary kinds, `factor` used by kScale only.
Tensor elementwise(ElementwiseKind kind, const Tensor& a,
                   const Tensor& b = {}, float factor = 1.0f);

// fmap (N, C, H, W) times gate (N, C, 1, 1), broadcast over the plane.
Tensor scale_channels(const Tensor& fmap, const Tensor& gate);

// Concatenates along the channel axis; all other extents must agree.
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);
Tensor reshape(const Tensor& x, Shape shape);

// x is (N, F, C, 1): a stack of F pooled C-vectors. Applies a width-3 kernel
// along the F axis with zero padding of one on each side, independently per
// channel. weight holds exactly 3 taps.
Tensor feature_axis_conv(const Tensor& x, const Tensor& weight);

// Softmax over the channel axis, independently for every (n, y, x).
Tensor softmax_channels(const Tensor& x);

// Scalar reductions, returned as (1,1,1,1) tensors.
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);
// mean |a - b|, or sum(w |a - b|) / sum(w) with a weight map (0 if sum(w)=0).
Tensor l1_loss(const Tensor& a, const Tensor& b, const Tensor& weight_map = {});
Tensor mse_loss(const Tensor& a, const Tensor& b);

}  // namespace hfe::ops
