#include "hfe/attention.hpp"

#include <cmath>

#include "hfe/error.hpp"
#include "hfe/ops.hpp"

namespace hfe {

namespace {

Tensor param(Shape shape) { return Tensor::zeros(shape, true); }

}  // namespace

void ChannelAttentionParams::append_to(std::vector<Tensor>& out) const {
  out.insert(out.end(), {squeeze_w, squeeze_b, excite_w, excite_b});
}

void RcabParams::append_to(std::vector<Tensor>& out) const {
  out.insert(out.end(), {conv1_w, conv1_b, conv2_w, conv2_b});
  attention.append_to(out);
}

void FeatureAttentionParams::append_to(std::vector<Tensor>& out) const {
  out.push_back(weight);
}

ChannelAttentionParams make_channel_attention(std::size_t channels,
                                              std::size_t reduction, Rng& rng) {
  if (reduction == 0 || channels % reduction != 0 || channels < reduction) {
    throw ContractViolation("channel attention: " + std::to_string(channels) +
                            " channels not divisible by reduction " +
                            std::to_string(reduction));
  }
  const std::size_t mid = channels / reduction;
  ChannelAttentionParams p;
  p.channels = channels;
  p.reduction = reduction;
  p.squeeze_w = param({mid, channels, 1, 1});
  p.squeeze_b = param({mid, 1, 1, 1});
  p.excite_w = param({channels, mid, 1, 1});
  p.excite_b = param({channels, 1, 1, 1});
  kaiming_uniform(p.squeeze_w, rng);
  // Squeeze units come in mirrored pairs: pooled statistics barely change
  // direction across inputs, and an unpaired ReLU pair could start dead.
  auto sw = p.squeeze_w.mutable_data();
  for (std::size_t m = 0; m + 1 < mid; m += 2) {
    for (std::size_t c = 0; c < channels; ++c) {
      sw[(m + 1) * channels + c] = -sw[m * channels + c];
    }
  }
  kaiming_uniform(p.excite_w, rng);
  return p;
}

RcabParams make_rcab(std::size_t channels, std::size_t reduction, Rng& rng) {
  RcabParams p;
  p.conv1_w = param({channels, channels, 3, 3});
  p.conv1_b = param({channels, 1, 1, 1});
  p.conv2_w = param({channels, channels, 3, 3});
  p.conv2_b = param({channels, 1, 1, 1});
  kaiming_uniform(p.conv1_w, rng);
  kaiming_uniform(p.conv2_w, rng);
  p.attention = make_channel_attention(channels, reduction, rng);
  return p;
}

FeatureAttentionParams make_feature_attention(std::size_t features,
                                              GateKind gate, Rng& rng) {
  if (features < 2) {
    throw ContractViolation("feature attention needs at least two features");
  }
  FeatureAttentionParams p;
  p.features = features;
  p.gate = gate;
  p.weight = param({1, 1, 1, 3});
  kaiming_uniform(p.weight, rng);
  return p;
}

Tensor channel_gate(const Tensor& fmap, const ChannelAttentionParams& p) {
  if (fmap.shape().c != p.channels) {
    throw ContractViolation("channel_attention: feature map " +
                            fmap.shape().str() + " expected " +
                            std::to_string(p.channels) + " channels");
  }
  Tensor pooled = ops::global_avg_pool(fmap);
  Tensor squeezed = ops::relu(ops::conv2d(pooled, p.squeeze_w, p.squeeze_b));
  return ops::sigmoid(ops::conv2d(squeezed, p.excite_w, p.excite_b));
}

Tensor channel_attention(const Tensor& fmap, const ChannelAttentionParams& p) {
  return ops::scale_channels(fmap, channel_gate(fmap, p));
}

Tensor rcab_forward(const Tensor& fmap, const RcabParams& p) {
  const ops::Conv2dOptions same{.stride = 1, .padding = 1, .dilation = 1};
  Tensor h = ops::relu(ops::conv2d(fmap, p.conv1_w, p.conv1_b, same));
  h = ops::conv2d(h, p.conv2_w, p.conv2_b, same);
  return ops::add(fmap, channel_attention(h, p.attention));
}

Tensor feature_gates(const std::vector<Tensor>& features,
                     const FeatureAttentionParams& p) {
  if (features.size() != p.features) {
    throw ContractViolation("feature_attention: got " +
                            std::to_string(features.size()) +
                            " features, configured for " +
                            std::to_string(p.features));
  }
  const Shape& s = features.front().shape();
  std::vector<Tensor> pooled;
  for (const Tensor& f : features) {
    if (f.shape() != s) {
      throw ContractViolation("feature_attention: feature " + f.shape().str() +
                              " differs from " + s.str());
    }
    pooled.push_back(ops::global_avg_pool(f));
  }
  const std::size_t nf = features.size();
  Tensor stack = ops::reshape(ops::concat_channels(pooled), {s.n, nf, s.c, 1});
  Tensor logits = ops::feature_axis_conv(stack, p.weight);
  return p.gate == GateKind::kSoftmax ? ops::softmax_channels(logits)
                                      : ops::sigmoid(logits);
}

Tensor feature_attention(const std::vector<Tensor>& features,
                         const FeatureAttentionParams& p) {
  Tensor gates = feature_gates(features, p);
  const Shape& s = features.front().shape();
  Tensor flat = ops::reshape(gates, {s.n, features.size() * s.c, 1, 1});
  Tensor out;
  for (std::size_t f = 0; f < features.size(); ++f) {
    Tensor g = ops::slice_channels(flat, f * s.c, s.c);
    Tensor term = ops::scale_channels(features[f], g);
    out = out.defined() ? ops::add(out, term) : term;
  }
  return out;
}

}  // namespace hfe
