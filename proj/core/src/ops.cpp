#include "hfe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "hfe/error.hpp"
#include "hfe/grid.hpp"

namespace hfe::ops {

namespace {

Tape* tape_for(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = active_tape();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return tape;
  }
  return nullptr;
}

bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

std::vector<float>& grad_of(const Tensor& t) { return t.impl()->grad; }
const std::vector<float>& data_of(const Tensor& t) { return t.impl()->data; }

void require_defined(const Tensor& t, const char* op, const char* what) {
  if (!t.defined()) {
    throw ContractViolation(std::string(op) + ": " + what + " is empty");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op, "first operand");
  require_defined(b, op, "second operand");
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " +
                            a.shape().str() + " vs " + b.shape().str());
  }
}

struct ConvGeom {
  long n, c, h, w;      // input
  long o, kh, kw;       // weight
  long oh, ow;          // output
  long stride, pad, dil;
};

// Output indices [lo, hi) whose input coordinate idx*stride + off lies in
// [0, extent).
void valid_range(long extent, long out_extent, long stride, long off, long& lo,
                 long& hi) {
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  const long last = extent - 1 - off;
  hi = last < 0 ? 0 : std::min(out_extent, last / stride + 1);
  if (hi < lo) hi = lo;
}

void conv_forward(const ConvGeom& g, const float* in, const float* wt,
                  const float* bias, float* out) {
  const long in_plane = g.h * g.w;
  const long out_plane = g.oh * g.ow;
  for (long n = 0; n < g.n; ++n) {
    for (long oc = 0; oc < g.o; ++oc) {
      float* o = out + (n * g.o + oc) * out_plane;
      std::fill(o, o + out_plane, bias ? bias[oc] : 0.0f);
      for (long ic = 0; ic < g.c; ++ic) {
        const float* ip = in + (n * g.c + ic) * in_plane;
        const float* wp = wt + (oc * g.c + ic) * g.kh * g.kw;
        for (long ky = 0; ky < g.kh; ++ky) {
          long y_lo, y_hi;
          const long y_off = ky * g.dil - g.pad;
          valid_range(g.h, g.oh, g.stride, y_off, y_lo, y_hi);
          for (long kx = 0; kx < g.kw; ++kx) {
            const float wv = wp[ky * g.kw + kx];
            long x_lo, x_hi;
            const long x_off = kx * g.dil - g.pad;
            valid_range(g.w, g.ow, g.stride, x_off, x_lo, x_hi);
            for (long oy = y_lo; oy < y_hi; ++oy) {
              const float* src = ip + (oy * g.stride + y_off) * g.w + x_off;
              float* dst = o + oy * g.ow;
              if (g.stride == 1) {
#pragma omp simd
                for (long ox = x_lo; ox < x_hi; ++ox) dst[ox] += wv * src[ox];
              } else {
                for (long ox = x_lo; ox < x_hi; ++ox) {
                  dst[ox] += wv * src[ox * g.stride];
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_input(const ConvGeom& g, const float* gout, const float* wt,
                         float* gin) {
  const long in_plane = g.h * g.w;
  const long out_plane = g.oh * g.ow;
  for (long n = 0; n < g.n; ++n) {
    for (long ic = 0; ic < g.c; ++ic) {
      float* gi = gin + (n * g.c + ic) * in_plane;
      for (long oc = 0; oc < g.o; ++oc) {
        const float* go = gout + (n * g.o + oc) * out_plane;
        const float* wp = wt + (oc * g.c + ic) * g.kh * g.kw;
        for (long ky = 0; ky < g.kh; ++ky) {
          long y_lo, y_hi;
          const long y_off = ky * g.dil - g.pad;
          valid_range(g.h, g.oh, g.stride, y_off, y_lo, y_hi);
          for (long kx = 0; kx < g.kw; ++kx) {
            const float wv = wp[ky * g.kw + kx];
            long x_lo, x_hi;
            const long x_off = kx * g.dil - g.pad;
            valid_range(g.w, g.ow, g.stride, x_off, x_lo, x_hi);
            for (long oy = y_lo; oy < y_hi; ++oy) {
              float* dst = gi + (oy * g.stride + y_off) * g.w + x_off;
              const float* src = go + oy * g.ow;
              if (g.stride == 1) {
#pragma omp simd
                for (long ox = x_lo; ox < x_hi; ++ox) dst[ox] += wv * src[ox];
              } else {
                for (long ox = x_lo; ox < x_hi; ++ox) {
                  dst[ox * g.stride] += wv * src[ox];
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_weight(const ConvGeom& g, const float* gout,
                          const float* in, float* gwt) {
  const long in_plane = g.h * g.w;
  const long out_plane = g.oh * g.ow;
  for (long oc = 0; oc < g.o; ++oc) {
    for (long ic = 0; ic < g.c; ++ic) {
      float* gw = gwt + (oc * g.c + ic) * g.kh * g.kw;
      for (long ky = 0; ky < g.kh; ++ky) {
        long y_lo, y_hi;
        const long y_off = ky * g.dil - g.pad;
        valid_range(g.h, g.oh, g.stride, y_off, y_lo, y_hi);
        for (long kx = 0; kx < g.kw; ++kx) {
          long x_lo, x_hi;
          const long x_off = kx * g.dil - g.pad;
          valid_range(g.w, g.ow, g.stride, x_off, x_lo, x_hi);
          double total = 0.0;
          for (long n = 0; n < g.n; ++n) {
            const float* go = gout + (n * g.o + oc) * out_plane;
            const float* ip = in + (n * g.c + ic) * in_plane;
            for (long oy = y_lo; oy < y_hi; ++oy) {
              const float* src = ip + (oy * g.stride + y_off) * g.w + x_off;
              const float* gr = go + oy * g.ow;
              float acc = 0.0f;
              if (g.stride == 1) {
#pragma omp simd reduction(+ : acc)
                for (long ox = x_lo; ox < x_hi; ++ox) acc += gr[ox] * src[ox];
              } else {
                for (long ox = x_lo; ox < x_hi; ++ox) {
                  acc += gr[ox] * src[ox * g.stride];
                }
              }
              total += acc;
            }
          }
          gw[ky * g.kw + kx] += static_cast<float>(total);
        }
      }
    }
  }
}

template <typename Fwd, typename Bwd>
Tensor unary_pointwise(const Tensor& x, const char* name, Fwd fwd, Bwd bwd) {
  require_defined(x, name, "input");
  const auto& xd = data_of(x);
  std::vector<float> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  Tensor y = make_op_output(x.shape(), std::move(out));
  if (Tape* tape = tape_for({&x})) {
    tape->record({x}, y, [x, y, bwd] {
      const auto& xd = data_of(x);
      const auto& yd = data_of(y);
      const auto& gy = grad_of(y);
      auto& gx = grad_of(x);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        gx[i] += gy[i] * bwd(xd[i], yd[i]);
      }
    });
  }
  return y;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               const Conv2dOptions& opt) {
  const long span = static_cast<long>(opt.dilation) *
                        (static_cast<long>(kernel) - 1) +
                    1;
  const long padded = static_cast<long>(in) + 2 * static_cast<long>(opt.padding);
  if (padded < span) return 0;
  return static_cast<std::size_t>((padded - span) /
                                      static_cast<long>(opt.stride) +
                                  1);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dOptions& opt) {
  require_defined(input, "conv2d", "input");
  require_defined(weight, "conv2d", "weight");
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (ws.c != is.c) {
    throw ContractViolation("conv2d: input " + is.str() +
                            " incompatible with weight " + ws.str() +
                            " (channel count)");
  }
  if (opt.stride < 1 || opt.dilation < 1) {
    throw ContractViolation("conv2d: stride and dilation must be >= 1");
  }
  if (bias.defined() && bias.numel() != ws.n) {
    throw ContractViolation("conv2d: bias " + bias.shape().str() +
                            " does not match weight " + ws.str());
  }
  const std::size_t oh = conv_output_extent(is.h, ws.h, opt);
  const std::size_t ow = conv_output_extent(is.w, ws.w, opt);
  if (oh == 0 || ow == 0 || is.n == 0 || ws.n == 0) {
    throw DegenerateGeometry("conv2d: input " + is.str() + " with weight " +
                             ws.str() + " yields an empty output");
  }
  const ConvGeom g{static_cast<long>(is.n),  static_cast<long>(is.c),
                   static_cast<long>(is.h),  static_cast<long>(is.w),
                   static_cast<long>(ws.n),  static_cast<long>(ws.h),
                   static_cast<long>(ws.w),  static_cast<long>(oh),
                   static_cast<long>(ow),    static_cast<long>(opt.stride),
                   static_cast<long>(opt.padding),
                   static_cast<long>(opt.dilation)};
  std::vector<float> out(is.n * ws.n * oh * ow);
  conv_forward(g, data_of(input).data(), data_of(weight).data(),
               bias.defined() ? data_of(bias).data() : nullptr, out.data());
  Tensor y = make_op_output({is.n, ws.n, oh, ow}, std::move(out));
  if (Tape* tape = tape_for({&input, &weight, &bias})) {
    std::vector<Tensor> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    tape->record(std::move(inputs), y, [g, input, weight, bias, y] {
      const auto& gy = grad_of(y);
      if (wants_grad(input)) {
        conv_backward_input(g, gy.data(), data_of(weight).data(),
                            grad_of(input).data());
      }
      if (wants_grad(weight)) {
        conv_backward_weight(g, gy.data(), data_of(input).data(),
                             grad_of(weight).data());
      }
      if (wants_grad(bias)) {
        auto& gb = grad_of(bias);
        const long plane = g.oh * g.ow;
        for (long oc = 0; oc < g.o; ++oc) {
          double total = 0.0;
          for (long n = 0; n < g.n; ++n) {
            const float* p = gy.data() + (n * g.o + oc) * plane;
            for (long i = 0; i < plane; ++i) total += p[i];
          }
          gb[oc] += static_cast<float>(total);
        }
      }
    });
  }
  return y;
}

Tensor reflect_pad(const Tensor& input, std::size_t pad) {
  require_defined(input, "reflect_pad", "input");
  if (pad == 0) return input;
  const Shape& s = input.shape();
  const Shape os{s.n, s.c, s.h + 2 * pad, s.w + 2 * pad};
  // Source offset within a plane for every padded position.
  std::vector<std::size_t> src(os.plane());
  const auto p = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t y = 0; y < os.h; ++y) {
    const auto sy = reflect_index(static_cast<std::ptrdiff_t>(y) - p,
                                  static_cast<std::ptrdiff_t>(s.h));
    for (std::size_t x = 0; x < os.w; ++x) {
      const auto sx = reflect_index(static_cast<std::ptrdiff_t>(x) - p,
                                    static_cast<std::ptrdiff_t>(s.w));
      src[y * os.w + x] = static_cast<std::size_t>(sy) * s.w +
                          static_cast<std::size_t>(sx);
    }
  }
  const auto& xd = data_of(input);
  std::vector<float> out(os.numel());
  const std::size_t planes = s.n * s.c;
  for (std::size_t k = 0; k < planes; ++k) {
    const float* in = xd.data() + k * s.plane();
    float* o = out.data() + k * os.plane();
    for (std::size_t i = 0; i < src.size(); ++i) o[i] = in[src[i]];
  }
  Tensor y = make_op_output(os, std::move(out));
  if (Tape* tape = tape_for({&input})) {
    tape->record({input}, y, [input, y, src = std::move(src), planes] {
      const auto& gy = grad_of(y);
      auto& gx = grad_of(input);
      const std::size_t in_plane = input.shape().plane();
      for (std::size_t k = 0; k < planes; ++k) {
        const float* g = gy.data() + k * src.size();
        float* d = gx.data() + k * in_plane;
        for (std::size_t i = 0; i < src.size(); ++i) d[src[i]] += g[i];
      }
    });
  }
  return y;
}

Tensor pixel_shuffle(const Tensor& input, std::size_t r) {
  require_defined(input, "pixel_shuffle", "input");
  const Shape& s = input.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw ContractViolation("pixel_shuffle: channel count " +
                            std::to_string(s.c) + " not divisible by r^2=" +
                            std::to_string(r * r));
  }
  const std::size_t oc = s.c / (r * r);
  const Shape os{s.n, oc, s.h * r, s.w * r};
  // Gather table: out index -> in index.
  std::vector<std::size_t> src(os.numel());
  std::size_t k = 0;
  for (std::size_t n = 0; n < os.n; ++n)
    for (std::size_t c = 0; c < oc; ++c)
      for (std::size_t y = 0; y < os.h; ++y)
        for (std::size_t x = 0; x < os.w; ++x) {
          const std::size_t ic = c * r * r + (y % r) * r + (x % r);
          src[k++] = ((n * s.c + ic) * s.h + y / r) * s.w + x / r;
        }
  const auto& xd = data_of(input);
  std::vector<float> out(os.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[src[i]];
  Tensor y = make_op_output(os, std::move(out));
  if (Tape* tape = tape_for({&input})) {
    tape->record({input}, y, [input, y, src = std::move(src)] {
      const auto& gy = grad_of(y);
      auto& gx = grad_of(input);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[src[i]] += gy[i];
    });
  }
  return y;
}

Tensor pixel_unshuffle(const Tensor& input, std::size_t r) {
  require_defined(input, "pixel_unshuffle", "input");
  const Shape& s = input.shape();
  if (r == 0 || s.h % r != 0 || s.w % r != 0) {
    throw ContractViolation("pixel_unshuffle: spatial size " + s.str() +
                            " not divisible by r=" + std::to_string(r));
  }
  const Shape os{s.n, s.c * r * r, s.h / r, s.w / r};
  std::vector<std::size_t> src(os.numel());
  std::size_t k = 0;
  for (std::size_t n = 0; n < os.n; ++n)
    for (std::size_t c = 0; c < os.c; ++c)
      for (std::size_t y = 0; y < os.h; ++y)
        for (std::size_t x = 0; x < os.w; ++x) {
          const std::size_t base = c / (r * r);
          const std::size_t i = (c % (r * r)) / r;
          const std::size_t j = c % r;
          src[k++] = ((n * s.c + base) * s.h + y * r + i) * s.w + x * r + j;
        }
  const auto& xd = data_of(input);
  std::vector<float> out(os.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[src[i]];
  Tensor y = make_op_output(os, std::move(out));
  if (Tape* tape = tape_for({&input})) {
    tape->record({input}, y, [input, y, src = std::move(src)] {
      const auto& gy = grad_of(y);
      auto& gx = grad_of(input);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[src[i]] += gy[i];
    });
  }
  return y;
}

Tensor global_avg_pool(const Tensor& input) {
  require_defined(input, "global_avg_pool", "input");
  const Shape& s = input.shape();
  const std::size_t plane = s.plane();
  if (plane == 0) {
    throw ContractViolation("global_avg_pool: empty spatial extent " + s.str());
  }
  const auto& xd = data_of(input);
  std::vector<float> out(s.n * s.c);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double total = 0.0;
    const float* p = xd.data() + i * plane;
    for (std::size_t j = 0; j < plane; ++j) total += p[j];
    out[i] = static_cast<float>(total / static_cast<double>(plane));
  }
  Tensor y = make_op_output({s.n, s.c, 1, 1}, std::move(out));
  if (Tape* tape = tape_for({&input})) {
    tape->record({input}, y, [input, y, plane] {
      const auto& gy = grad_of(y);
      auto& gx = grad_of(input);
      const float inv = 1.0f / static_cast<float>(plane);
      for (std::size_t i = 0; i < gy.size(); ++i) {
        const float g = gy[i] * inv;
        float* p = gx.data() + i * plane;
        for (std::size_t j = 0; j < plane; ++j) p[j] += g;
      }
    });
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& ad = data_of(a);
  const auto& bd = data_of(b);
  std::vector<float> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  Tensor y = make_op_output(a.shape(), std::move(out));
  if (Tape* tape = tape_for({&a, &b})) {
    tape->record({a, b}, y, [a, b, y] {
      const auto& gy = grad_of(y);
      if (wants_grad(a)) {
        auto& g = grad_of(a);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
      }
      if (wants_grad(b)) {
        auto& g = grad_of(b);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& ad = data_of(a);
  const auto& bd = data_of(b);
  std::vector<float> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  Tensor y = make_op_output(a.shape(), std::move(out));
  if (Tape* tape = tape_for({&a, &b})) {
    tape->record({a, b}, y, [a, b, y] {
      const auto& gy = grad_of(y);
      if (wants_grad(a)) {
        auto& g = grad_of(a);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
      }
      if (wants_grad(b)) {
        auto& g = grad_of(b);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] -= gy[i];
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& ad = data_of(a);
  const auto& bd = data_of(b);
  std::vector<float> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  Tensor y = make_op_output(a.shape(), std::move(out));
  if (Tape* tape = tape_for({&a, &b})) {
    tape->record({a, b}, y, [a, b, y] {
      const auto& gy = grad_of(y);
      if (wants_grad(a)) {
        auto& g = grad_of(a);
        const auto& bd = data_of(b);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * bd[i];
      }
      if (wants_grad(b)) {
        auto& g = grad_of(b);
        const auto& ad = data_of(a);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * ad[i];
      }
    });
  }
  return y;
}

Tensor relu(const Tensor& x) {
  return unary_pointwise(
      x, "relu", [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_pointwise(
      x, "sigmoid",
      [](float v) {
        // Split on sign so exp never overflows.
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0f + e);
      },
      [](float, float s) { return s * (1.0f - s); });
}

Tensor scale(const Tensor& x, float factor) {
  return unary_pointwise(
      x, "scale", [factor](float v) { return v * factor; },
      [factor](float, float) { return factor; });
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b,
                   float factor) {
  switch (kind) {
    case ElementwiseKind::kAdd:
      return add(a, b);
    case ElementwiseKind::kMul:
      return mul(a, b);
    case ElementwiseKind::kRelu:
      return relu(a);
    case ElementwiseKind::kSigmoid:
      return sigmoid(a);
    case ElementwiseKind::kScale:
      return scale(a, factor);
  }
  throw ContractViolation("elementwise: unknown kind");
}

Tensor scale_channels(const Tensor& fmap, const Tensor& gate) {
  require_defined(fmap, "scale_channels", "feature map");
  require_defined(gate, "scale_channels", "gate");
  const Shape& s = fmap.shape();
  if (gate.shape() != Shape{s.n, s.c, 1, 1}) {
    throw ContractViolation("scale_channels: gate " + gate.shape().str() +
                            " does not match feature map " + s.str());
  }
  const std::size_t plane = s.plane();
  const auto& fd = data_of(fmap);
  const auto& gd = data_of(gate);
  std::vector<float> out(fd.size());
  for (std::size_t i = 0; i < gd.size(); ++i) {
    for (std::size_t j = 0; j < plane; ++j) {
      out[i * plane + j] = fd[i * plane + j] * gd[i];
    }
  }
  Tensor y = make_op_output(s, std::move(out));
  if (Tape* tape = tape_for({&fmap, &gate})) {
    tape->record({fmap, gate}, y, [fmap, gate, y, plane] {
      const auto& gy = grad_of(y);
      const auto& gd = data_of(gate);
      if (wants_grad(fmap)) {
        auto& gf = grad_of(fmap);
        for (std::size_t i = 0; i < gd.size(); ++i)
          for (std::size_t j = 0; j < plane; ++j)
            gf[i * plane + j] += gy[i * plane + j] * gd[i];
      }
      if (wants_grad(gate)) {
        auto& gg = grad_of(gate);
        const auto& fd = data_of(fmap);
        for (std::size_t i = 0; i < gd.size(); ++i) {
          double total = 0.0;
          for (std::size_t j = 0; j < plane; ++j) {
            total += static_cast<double>(gy[i * plane + j]) * fd[i * plane + j];
          }
          gg[i] += static_cast<float>(total);
        }
      }
    });
  }
  return y;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractViolation("concat_channels: no inputs");
  for (const Tensor& p : parts) require_defined(p, "concat_channels", "part");
  const Shape& first = parts.front().shape();
  std::size_t channels = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ContractViolation("concat_channels: " + s.str() +
                              " incompatible with " + first.str());
    }
    channels += s.c;
  }
  const Shape os{first.n, channels, first.h, first.w};
  const std::size_t plane = first.plane();
  std::vector<float> out(os.numel());
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const auto& pd = data_of(p);
    const std::size_t block = p.shape().c * plane;
    for (std::size_t n = 0; n < os.n; ++n) {
      std::copy_n(pd.data() + n * block, block,
                  out.data() + n * channels * plane + offset * plane);
    }
    offset += p.shape().c;
  }
  Tensor y = make_op_output(os, std::move(out));
  Tape* tape = active_tape();
  const bool any = std::any_of(parts.begin(), parts.end(), wants_grad);
  if (tape && any) {
    tape->record(parts, y, [parts, y, channels, plane] {
      const auto& gy = grad_of(y);
      std::size_t offset = 0;
      for (const Tensor& p : parts) {
        const std::size_t block = p.shape().c * plane;
        if (wants_grad(p)) {
          auto& gp = grad_of(p);
          for (std::size_t n = 0; n < p.shape().n; ++n) {
            const float* src = gy.data() + n * channels * plane + offset * plane;
            float* dst = gp.data() + n * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        offset += p.shape().c;
      }
    });
  }
  return y;
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  require_defined(x, "slice_channels", "input");
  const Shape& s = x.shape();
  if (count == 0 || begin + count > s.c) {
    throw ContractViolation("slice_channels: range [" + std::to_string(begin) +
                            ", " + std::to_string(begin + count) +
                            ") outside " + s.str());
  }
  const std::size_t plane = s.plane();
  const Shape os{s.n, count, s.h, s.w};
  const auto& xd = data_of(x);
  std::vector<float> out(os.numel());
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy_n(xd.data() + (n * s.c + begin) * plane, count * plane,
                out.data() + n * count * plane);
  }
  Tensor y = make_op_output(os, std::move(out));
  if (Tape* tape = tape_for({&x})) {
    tape->record({x}, y, [x, y, begin, count, plane] {
      const auto& gy = grad_of(y);
      auto& gx = grad_of(x);
      const std::size_t c = x.shape().c;
      for (std::size_t n = 0; n < x.shape().n; ++n) {
        const float* src = gy.data() + n * count * plane;
        float* dst = gx.data() + (n * c + begin) * plane;
        for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
      }
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape", "input");
  if (shape.numel() != x.numel()) {
    throw ContractViolation("reshape: " + x.shape().str() + " -> " +
                            shape.str() + " changes element count");
  }
  Tensor y = make_op_output(shape, data_of(x));
  if (Tape* tape = tape_for({&x})) {
    tape->record({x}, y, [x, y] {
      const auto& gy = grad_of(y);
      auto& gx = grad_of(x);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor feature_axis_conv(const Tensor& x, const Tensor& weight) {
  require_defined(x, "feature_axis_conv", "input");
  require_defined(weight, "feature_axis_conv", "weight");
  const Shape& s = x.shape();
  if (s.w != 1 || weight.numel() != 3) {
    throw ContractViolation("feature_axis_conv: expected (N,F,C,1) input and 3 "
                            "taps, got " + s.str() + " and " +
                            weight.shape().str());
  }
  const long nf = static_cast<long>(s.c);
  const long nc = static_cast<long>(s.h);
  const auto& xd = data_of(x);
  const auto& wd = data_of(weight);
  std::vector<float> out(s.numel(), 0.0f);
  for (long n = 0; n < static_cast<long>(s.n); ++n) {
    const float* xn = xd.data() + n * nf * nc;
    float* yn = out.data() + n * nf * nc;
    for (long f = 0; f < nf; ++f) {
      for (long k = 0; k < 3; ++k) {
        const long src = f + k - 1;
        if (src < 0 || src >= nf) continue;
        for (long c = 0; c < nc; ++c) yn[f * nc + c] += wd[k] * xn[src * nc + c];
      }
    }
  }
  Tensor y = make_op_output(s, std::move(out));
  if (Tape* tape = tape_for({&x, &weight})) {
    tape->record({x, weight}, y, [x, weight, y, nf, nc] {
      const auto& gy = grad_of(y);
      const auto& xd = data_of(x);
      const auto& wd = data_of(weight);
      const long batches = static_cast<long>(x.shape().n);
      double gw[3] = {0.0, 0.0, 0.0};
      for (long n = 0; n < batches; ++n) {
        const float* xn = xd.data() + n * nf * nc;
        const float* gn = gy.data() + n * nf * nc;
        for (long f = 0; f < nf; ++f) {
          for (long k = 0; k < 3; ++k) {
            const long src = f + k - 1;
            if (src < 0 || src >= nf) continue;
            for (long c = 0; c < nc; ++c) {
              gw[k] += static_cast<double>(gn[f * nc + c]) * xn[src * nc + c];
            }
            if (wants_grad(x)) {
              float* gx = grad_of(x).data() + n * nf * nc;
              for (long c = 0; c < nc; ++c) gx[src * nc + c] += wd[k] * gn[f * nc + c];
            }
          }
        }
      }
      if (wants_grad(weight)) {
        auto& g = grad_of(weight);
        for (int k = 0; k < 3; ++k) g[k] += static_cast<float>(gw[k]);
      }
    });
  }
  return y;
}

Tensor softmax_channels(const Tensor& x) {
  require_defined(x, "softmax_channels", "input");
  const Shape& s = x.shape();
  const std::size_t plane = s.plane();
  const auto& xd = data_of(x);
  std::vector<float> out(xd.size());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t base = n * s.c * plane + i;
      float peak = xd[base];
      for (std::size_t c = 1; c < s.c; ++c) peak = std::max(peak, xd[base + c * plane]);
      double total = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const float e = std::exp(xd[base + c * plane] - peak);
        out[base + c * plane] = e;
        total += e;
      }
      for (std::size_t c = 0; c < s.c; ++c) {
        out[base + c * plane] = static_cast<float>(out[base + c * plane] / total);
      }
    }
  }
  Tensor y = make_op_output(s, std::move(out));
  if (Tape* tape = tape_for({&x})) {
    tape->record({x}, y, [x, y, plane] {
      const Shape& s = x.shape();
      const auto& yd = data_of(y);
      const auto& gy = grad_of(y);
      auto& gx = grad_of(x);
      for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t base = n * s.c * plane + i;
          double dot = 0.0;
          for (std::size_t c = 0; c < s.c; ++c) {
            dot += static_cast<double>(gy[base + c * plane]) * yd[base + c * plane];
          }
          for (std::size_t c = 0; c < s.c; ++c) {
            const std::size_t k = base + c * plane;
            gx[k] += static_cast<float>(yd[k] * (gy[k] - dot));
          }
        }
      }
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum", "input");
  double total = 0.0;
  for (float v : data_of(x)) total += v;
  Tensor y = make_op_output({1, 1, 1, 1}, {static_cast<float>(total)});
  if (Tape* tape = tape_for({&x})) {
    tape->record({x}, y, [x, y] {
      const float g = grad_of(y)[0];
      for (float& v : grad_of(x)) v += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean", "input");
  if (x.numel() == 0) throw ContractViolation("mean of empty tensor");
  const double count = static_cast<double>(x.numel());
  double total = 0.0;
  for (float v : data_of(x)) total += v;
  Tensor y = make_op_output({1, 1, 1, 1}, {static_cast<float>(total / count)});
  if (Tape* tape = tape_for({&x})) {
    tape->record({x}, y, [x, y, count] {
      const float g = static_cast<float>(grad_of(y)[0] / count);
      for (float& v : grad_of(x)) v += g;
    });
  }
  return y;
}

Tensor l1_loss(const Tensor& a, const Tensor& b, const Tensor& weight_map) {
  require_same_shape(a, b, "l1_loss");
  if (weight_map.defined() && weight_map.shape() != a.shape()) {
    throw ContractViolation("l1_loss: weight map " + weight_map.shape().str() +
                            " does not match " + a.shape().str());
  }
  const auto& ad = data_of(a);
  const auto& bd = data_of(b);
  const float* wd = weight_map.defined() ? data_of(weight_map).data() : nullptr;
  double total = 0.0;
  double weight_total = 0.0;
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double w = wd ? wd[i] : 1.0;
    total += w * std::fabs(static_cast<double>(ad[i]) - bd[i]);
    weight_total += w;
  }
  const float value =
      weight_total > 0.0 ? static_cast<float>(total / weight_total) : 0.0f;
  Tensor y = make_op_output({1, 1, 1, 1}, {value});
  if (Tape* tape = tape_for({&a, &b})) {
    tape->record({a, b}, y, [a, b, weight_map, y, weight_total] {
      if (weight_total <= 0.0) return;
      const auto& ad = data_of(a);
      const auto& bd = data_of(b);
      const float* wd =
          weight_map.defined() ? data_of(weight_map).data() : nullptr;
      const float g = static_cast<float>(grad_of(y)[0] / weight_total);
      auto sign = [](float d) { return d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f); };
      if (wants_grad(a)) {
        auto& ga = grad_of(a);
        for (std::size_t i = 0; i < ad.size(); ++i) {
          ga[i] += g * (wd ? wd[i] : 1.0f) * sign(ad[i] - bd[i]);
        }
      }
      if (wants_grad(b)) {
        auto& gb = grad_of(b);
        for (std::size_t i = 0; i < ad.size(); ++i) {
          gb[i] -= g * (wd ? wd[i] : 1.0f) * sign(ad[i] - bd[i]);
        }
      }
    });
  }
  return y;
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse_loss");
  const auto& ad = data_of(a);
  const auto& bd = data_of(b);
  double total = 0.0;
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double d = static_cast<double>(ad[i]) - bd[i];
    total += d * d;
  }
  const double count = static_cast<double>(ad.size());
  Tensor y = make_op_output({1, 1, 1, 1}, {static_cast<float>(total / count)});
  if (Tape* tape = tape_for({&a, &b})) {
    tape->record({a, b}, y, [a, b, y, count] {
      const auto& ad = data_of(a);
      const auto& bd = data_of(b);
      const float g = static_cast<float>(2.0 * grad_of(y)[0] / count);
      if (wants_grad(a)) {
        auto& ga = grad_of(a);
        for (std::size_t i = 0; i < ad.size(); ++i) ga[i] += g * (ad[i] - bd[i]);
      }
      if (wants_grad(b)) {
        auto& gb = grad_of(b);
        for (std::size_t i = 0; i < ad.size(); ++i) gb[i] -= g * (ad[i] - bd[i]);
      }
    });
  }
  return y;
}

}  // namespace hfe::ops
