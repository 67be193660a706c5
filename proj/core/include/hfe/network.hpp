#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hfe/attention.hpp"
#include "hfe/edge_filter.hpp"
#include "hfe/layers.hpp"

namespace hfe {

// Topology of the multi-scale enhancement network. Scale 0 is the input
// resolution; scale i runs at 1/2^i.
struct NetworkConfig {
  std::vector<std::size_t> blocks_per_scale{4, 16, 64};
  std::size_t channels = 64;
  std::size_t sr_scale = 1;  // 1 (denoise/deblur), 2 or 4
  std::size_t reduction = 4;
  std::size_t edge_scales = 3;
  bool edge_trainable = true;
  GateKind gate = GateKind::kSigmoid;
  std::uint64_t seed = 0;

  static NetworkConfig full();
  // blocks [1, 2, 4], 8 channels.
  static NetworkConfig desk();

  std::size_t scales() const { return blocks_per_scale.size(); }
  // Input height and width must be multiples of this.
  std::size_t spatial_multiple() const { return std::size_t{1} << (scales() - 1); }
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

struct ModelParams {
  NetworkConfig config;
  std::vector<ConvParams> input_down;   // scales-1 stride-2 convs, 3 -> 3
  std::vector<ConvParams> heads;        // per scale, 3 -> C
  std::vector<ConvParams> pre_down;     // i -> i+1, stride 2, C -> C
  std::vector<ConvParams> pre_up;       // i+1 -> i, C -> 4C then shuffle
  std::vector<FeatureAttentionParams> pre_fusion;   // per scale, F = scales
  std::vector<std::vector<RcabParams>> bodies;
  EdgeFilterBank edges;
  std::vector<ConvParams> edge_proj;    // per scale, 1x1 bank-out -> C
  std::vector<FeatureAttentionParams> post_fusion;  // F = 4, ..., 4, 3
  std::vector<ConvParams> post_up;      // i+1 -> i, C -> 4C then shuffle
  ConvParams tail;                      // C -> 3 s^2, zero-initialised
  ConvParams skip;                      // 3 -> 3 s^2, only when s > 1

  // Every tensor in serialisation order (frozen edge kernels included).
  std::vector<Tensor> tensors() const;
  // Tensors the optimiser updates.
  std::vector<Tensor> trainable() const;
  std::size_t parameter_count() const;
};

ModelParams build(const NetworkConfig& config);

// input (N, 3, H, W) -> (N, 3, H*s, W*s).
Tensor forward(const ModelParams& params, const Tensor& input);

std::string gate_name(GateKind gate);
GateKind parse_gate(const std::string& name);

}  // namespace hfe
