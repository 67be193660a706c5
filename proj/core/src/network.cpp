#include "hfe/network.hpp"

#include "hfe/error.hpp"
#include "hfe/ops.hpp"

namespace hfe {

NetworkConfig NetworkConfig::full() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::desk() {
  NetworkConfig c;
  c.blocks_per_scale = {1, 2, 4};
  c.channels = 8;
  return c;
}

void NetworkConfig::validate() const {
  if (blocks_per_scale.empty()) {
    throw ConfigError("network: at least one scale is required");
  }
  for (std::size_t b : blocks_per_scale) {
    if (b < 1) throw ConfigError("network: every body needs >= 1 block");
  }
  if (channels < 1) throw ConfigError("network: channels must be >= 1");
  if (sr_scale != 1 && sr_scale != 2 && sr_scale != 4) {
    throw ConfigError("network: sr_scale must be 1, 2 or 4");
  }
  if (reduction < 1 || channels % reduction != 0 || channels < reduction) {
    throw ConfigError("network: channels must be a multiple of reduction");
  }
  if (edge_scales < 1) throw ConfigError("network: edge_scales must be >= 1");
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : input_down) p.append_to(out);
  for (const auto& p : heads) p.append_to(out);
  for (const auto& p : pre_down) p.append_to(out);
  for (const auto& p : pre_up) p.append_to(out);
  for (const auto& p : pre_fusion) p.append_to(out);
  for (const auto& body : bodies)
    for (const auto& block : body) block.append_to(out);
  out.insert(out.end(), edges.weights.begin(), edges.weights.end());
  for (const auto& p : edge_proj) p.append_to(out);
  for (const auto& p : post_fusion) p.append_to(out);
  for (const auto& p : post_up) p.append_to(out);
  tail.append_to(out);
  if (skip.w.defined()) skip.append_to(out);
  return out;
}

std::vector<Tensor> ModelParams::trainable() const {
  std::vector<Tensor> all = tensors();
  std::vector<Tensor> out;
  for (const Tensor& t : all) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const Tensor& t : tensors()) total += t.numel();
  return total;
}

ModelParams build(const NetworkConfig& config) {
  config.validate();
  Rng rng = derive_rng(config.seed, 0);
  const std::size_t k = config.scales();
  const std::size_t c = config.channels;
  const std::size_t s = config.sr_scale;
  ModelParams p;
  p.config = config;
  for (std::size_t i = 1; i < k; ++i) p.input_down.push_back(make_conv(3, 3, 3, rng));
  for (std::size_t i = 0; i < k; ++i) p.heads.push_back(make_conv(c, 3, 3, rng));
  for (std::size_t i = 0; i + 1 < k; ++i) {
    p.pre_down.push_back(make_conv(c, c, 3, rng));
    p.pre_up.push_back(make_conv(4 * c, c, 3, rng));
  }
  if (k > 1) {
    for (std::size_t i = 0; i < k; ++i) {
      p.pre_fusion.push_back(make_feature_attention(k, config.gate, rng));
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<RcabParams> body;
    for (std::size_t b = 0; b < config.blocks_per_scale[i]; ++b) {
      body.push_back(make_rcab(c, config.reduction, rng));
    }
    p.bodies.push_back(std::move(body));
  }
  p.edges = build_bank(3, config.edge_scales, config.edge_trainable);
  for (std::size_t i = 0; i < k; ++i) {
    p.edge_proj.push_back(make_conv(c, p.edges.out_channels(), 1, rng));
  }
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t features = i + 1 < k ? 4 : 3;
    p.post_fusion.push_back(make_feature_attention(features, config.gate, rng));
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    p.post_up.push_back(make_conv(4 * c, c, 3, rng));
  }
  p.tail = make_zero_conv(3 * s * s, c, 3);
  if (s > 1) {
    // Starts as nearest-neighbour upsampling of the input.
    p.skip = make_zero_conv(3 * s * s, 3, 3);
    auto w = p.skip.w.mutable_data();
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t sub = 0; sub < s * s; ++sub) {
        const std::size_t oc = ch * s * s + sub;
        w[((oc * 3 + ch) * 3 + 1) * 3 + 1] = 1.0f;
      }
    }
  }
  return p;
}

namespace {

Tensor upsample2(const Tensor& x, const ConvParams& up) {
  return ops::pixel_shuffle(apply_conv(x, up), 2);
}

// Moves a feature map from scale `from` to scale `to` with the shared
// stride-2 / pixel-shuffle resamplers.
Tensor resample(Tensor x, std::size_t from, std::size_t to,
                const std::vector<ConvParams>& down,
                const std::vector<ConvParams>& up) {
  while (from < to) {
    x = apply_conv(x, down[from], 2);
    ++from;
  }
  while (from > to) {
    --from;
    x = upsample2(x, up[from]);
  }
  return x;
}

}  // namespace

Tensor forward(const ModelParams& p, const Tensor& input) {
  const NetworkConfig& cfg = p.config;
  const Shape& is = input.shape();
  if (is.c != 3) {
    throw ContractViolation("forward: expected 3 input channels, got " +
                            is.str());
  }
  const std::size_t mult = cfg.spatial_multiple();
  if (is.h == 0 || is.w == 0 || is.h % mult != 0 || is.w % mult != 0) {
    throw ContractViolation("forward: input " + is.str() +
                            " needs height and width divisible by " +
                            std::to_string(mult));
  }
  const std::size_t k = cfg.scales();

  std::vector<Tensor> xs{input};
  for (std::size_t i = 1; i < k; ++i) {
    xs.push_back(apply_conv(xs.back(), p.input_down[i - 1], 2));
  }
  std::vector<Tensor> low;
  for (std::size_t i = 0; i < k; ++i) low.push_back(apply_conv(xs[i], p.heads[i]));

  std::vector<Tensor> high;
  for (std::size_t i = 0; i < k; ++i) {
    Tensor h = low[i];
    if (k > 1) {
      std::vector<Tensor> gathered;
      for (std::size_t j = 0; j < k; ++j) {
        gathered.push_back(resample(low[j], j, i, p.pre_down, p.pre_up));
      }
      h = feature_attention(gathered, p.pre_fusion[i]);
    }
    for (const RcabParams& block : p.bodies[i]) h = rcab_forward(h, block);
    high.push_back(std::move(h));
  }

  Tensor carried;
  for (std::size_t i = k; i-- > 0;) {
    Tensor edge = apply_conv(extract_edges(xs[i], p.edges), p.edge_proj[i]);
    std::vector<Tensor> parts{high[i], low[i], edge};
    if (carried.defined()) parts.push_back(upsample2(carried, p.post_up[i]));
    carried = feature_attention(parts, p.post_fusion[i]);
  }

  const std::size_t s = cfg.sr_scale;
  Tensor residual = apply_conv(carried, p.tail);
  if (s == 1) return ops::add(input, residual);
  Tensor base = ops::pixel_shuffle(apply_conv(input, p.skip), s);
  return ops::add(base, ops::pixel_shuffle(residual, s));
}

std::string gate_name(GateKind gate) {
  return gate == GateKind::kSoftmax ? "softmax" : "sigmoid";
}

GateKind parse_gate(const std::string& name) {
  if (name == "sigmoid") return GateKind::kSigmoid;
  if (name == "softmax") return GateKind::kSoftmax;
  throw ConfigError("unknown gate '" + name + "' (sigmoid|softmax)");
}

}  // namespace hfe
