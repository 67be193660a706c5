#pragma once

#include <cstddef>
#include <vector>

#include "hfe/random.hpp"
#include "hfe/tensor.hpp"

namespace hfe {

enum class GateKind { kSigmoid, kSoftmax };

// Squeeze (C -> C/r) and excite (C/r -> C) 1x1 convolutions.
struct ChannelAttentionParams {
  std::size_t channels = 0;
  std::size_t reduction = 4;
  Tensor squeeze_w;  // (C/r, C, 1, 1)
  Tensor squeeze_b;  // (C/r, 1, 1, 1)
  Tensor excite_w;   // (C, C/r, 1, 1)
  Tensor excite_b;   // (C, 1, 1, 1)

  void append_to(std::vector<Tensor>& out) const;
};

struct RcabParams {
  Tensor conv1_w;  // (C, C, 3, 3)
  Tensor conv1_b;
  Tensor conv2_w;
  Tensor conv2_b;
  ChannelAttentionParams attention;

  void append_to(std::vector<Tensor>& out) const;
};

// Width-3 kernel convolved along the stack of pooled feature vectors.
struct FeatureAttentionParams {
  std::size_t features = 2;
  Tensor weight;  // (1, 1, 1, 3)
  GateKind gate = GateKind::kSigmoid;

  void append_to(std::vector<Tensor>& out) const;
};

ChannelAttentionParams make_channel_attention(std::size_t channels,
                                              std::size_t reduction, Rng& rng);
RcabParams make_rcab(std::size_t channels, std::size_t reduction, Rng& rng);
FeatureAttentionParams make_feature_attention(std::size_t features,
                                              GateKind gate, Rng& rng);

// sigmoid(excite(relu(squeeze(GAP(fmap))))), shape (N, C, 1, 1).
Tensor channel_gate(const Tensor& fmap, const ChannelAttentionParams& p);
Tensor channel_attention(const Tensor& fmap, const ChannelAttentionParams& p);
// fmap + channel_attention(conv2(relu(conv1(fmap))))
Tensor rcab_forward(const Tensor& fmap, const RcabParams& p);

// Per-feature, per-channel gates (N, F, C, 1) before they are applied.
Tensor feature_gates(const std::vector<Tensor>& features,
                     const FeatureAttentionParams& p);
// sum_f gate_f * feature_f
Tensor feature_attention(const std::vector<Tensor>& features,
                         const FeatureAttentionParams& p);

}  // namespace hfe
