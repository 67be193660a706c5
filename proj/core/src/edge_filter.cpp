#include "hfe/edge_filter.hpp"

#include "hfe/error.hpp"
#include "hfe/ops.hpp"

namespace hfe {

std::array<float, 9> edge_kernel_taps(EdgeKernel kind) {
  constexpr float t = 1.0f / 3.0f;
  switch (kind) {
    case EdgeKernel::kPrewittX:
      return {-t, 0.0f, t, -t, 0.0f, t, -t, 0.0f, t};
    case EdgeKernel::kPrewittY:
      return {-t, -t, -t, 0.0f, 0.0f, 0.0f, t, t, t};
    case EdgeKernel::kLaplacian:
      return {0.0f, 0.25f, 0.0f, 0.25f, -1.0f, 0.25f, 0.0f, 0.25f, 0.0f};
  }
  throw ContractViolation("edge_kernel_taps: unknown kernel");
}

EdgeFilterBank build_bank(std::size_t in_channels, std::size_t scales,
                          bool trainable) {
  if (scales < 1 || in_channels < 1) {
    throw ContractViolation("build_bank: need at least one scale and channel");
  }
  constexpr EdgeKernel kinds[] = {EdgeKernel::kPrewittX, EdgeKernel::kPrewittY,
                                  EdgeKernel::kLaplacian};
  EdgeFilterBank bank;
  bank.in_channels = in_channels;
  bank.trainable = trainable;
  for (std::size_t s = 0; s < scales; ++s) {
    Tensor w = Tensor::zeros({3 * in_channels, in_channels, 3, 3});
    auto d = w.mutable_data();
    for (std::size_t ic = 0; ic < in_channels; ++ic) {
      for (std::size_t k = 0; k < 3; ++k) {
        const auto taps = edge_kernel_taps(kinds[k]);
        const std::size_t oc = 3 * ic + k;
        std::copy(taps.begin(), taps.end(),
                  d.begin() + static_cast<std::ptrdiff_t>((oc * in_channels + ic) * 9));
      }
    }
    w.set_requires_grad(trainable);
    bank.weights.push_back(std::move(w));
    bank.dilations.push_back(std::size_t{1} << s);
  }
  return bank;
}

Tensor extract_edges(const Tensor& img, const EdgeFilterBank& bank) {
  if (img.shape().c != bank.in_channels) {
    throw ContractViolation("extract_edges: image " + img.shape().str() +
                            " does not match bank with " +
                            std::to_string(bank.in_channels) + " channels");
  }
  std::vector<Tensor> responses;
  for (std::size_t s = 0; s < bank.scales(); ++s) {
    const std::size_t d = bank.dilations[s];
    // Reflected borders keep the zero-DC response exact up to the edge.
    responses.push_back(ops::conv2d(ops::reflect_pad(img, d), bank.weights[s],
                                    {}, {.stride = 1, .padding = 0, .dilation = d}));
  }
  return responses.size() == 1 ? responses.front()
                               : ops::concat_channels(responses);
}

}  // namespace hfe
