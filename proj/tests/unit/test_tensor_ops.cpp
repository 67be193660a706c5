#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "reference.hpp"
#include "hfe/error.hpp"
#include "hfe/ops.hpp"
#include "hfe/optim.hpp"

namespace hfe {
namespace {

using testing::grad_check;
using testing::random_tensor;

// Quadruple loop over output pixels and kernel taps, double accumulation.
std::vector<double> brute_conv(const Tensor& x, const Tensor& w, const Tensor& b,
                               std::size_t stride, std::size_t pad, std::size_t dil) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const std::size_t oh = (xs.h + 2 * pad - dil * (ws.h - 1) - 1) / stride + 1;
  const std::size_t ow = (xs.w + 2 * pad - dil * (ws.w - 1) - 1) / stride + 1;
  std::vector<double> out;
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t o = 0; o < ws.n; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = b.defined() ? b.data()[o] : 0.0;
          for (std::size_t i = 0; i < ws.c; ++i)
            for (std::size_t ky = 0; ky < ws.h; ++ky)
              for (std::size_t kx = 0; kx < ws.w; ++kx) {
                const long iy = long(y * stride + ky * dil) - long(pad);
                const long ix = long(xx * stride + kx * dil) - long(pad);
                if (iy < 0 || ix < 0 || iy >= long(xs.h) || ix >= long(xs.w)) continue;
                acc += double(x.at(n, i, iy, ix)) * w.at(o, i, ky, kx);
              }
          out.push_back(acc);
        }
  return out;
}

TEST(Conv2d, IdentityKernel) {
  const Tensor x = Tensor::full({1, 1, 3, 3}, 1.0f);
  const Tensor w = Tensor::full({1, 1, 1, 1}, 1.0f);
  const Tensor y = ops::conv2d(x, w, {});
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y.data()[i], 1.0f);
}

TEST(Conv2d, StridedShape) {
  const Tensor y = ops::conv2d(Tensor::zeros({2, 3, 8, 8}), Tensor::zeros({5, 3, 3, 3}), {},
                               {.stride = 2, .padding = 1});
  EXPECT_EQ(y.shape(), (Shape{2, 5, 4, 4}));
}

TEST(Conv2d, MatchesBruteForce) {
  Rng rng = derive_rng(1, 0);
  const Tensor x = random_tensor({1, 2, 5, 5}, rng);
  const Tensor w = random_tensor({2, 2, 3, 3}, rng);
  const Tensor y = ops::conv2d(x, w, {});
  const auto ref = brute_conv(x, w, {}, 1, 0, 1);
  ASSERT_EQ(ref.size(), y.numel());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-5);
}

TEST(Conv2d, MatchesBruteForceAcrossGeometries) {
  Rng rng = derive_rng(2, 0);
  for (std::size_t stride : {1, 2, 3})
    for (std::size_t pad : {0, 1, 2})
      for (std::size_t dil : {1, 2}) {
        const Tensor x = random_tensor({2, 3, 9, 8}, rng);
        const Tensor w = random_tensor({4, 3, 3, 3}, rng);
        const Tensor b = random_tensor({4, 1, 1, 1}, rng);
        const Tensor y = ops::conv2d(x, w, b, {stride, pad, dil});
        const auto ref = brute_conv(x, w, b, stride, pad, dil);
        ASSERT_EQ(ref.size(), y.numel());
        for (std::size_t i = 0; i < ref.size(); ++i) {
          ASSERT_NEAR(y.data()[i], ref[i], 1e-5)
              << "stride " << stride << " pad " << pad << " dil " << dil;
        }
      }
}

TEST(Conv2d, ChannelMismatchNamesBothShapes) {
  try {
    ops::conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), {});
    FAIL();
  } catch (const ContractViolation& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(1,2,4,4)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(1,3,3,3)"), std::string::npos) << msg;
  }
}

TEST(Conv2d, EmptyOutputIsDegenerate) {
  EXPECT_THROW(ops::conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), {}),
               DegenerateGeometry);
}

TEST(PixelShuffle, DefiningPermutation) {
  std::vector<float> d;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 4; ++i) d.push_back(float(c));
  const Tensor y = ops::pixel_shuffle(Tensor::from_data({1, 4, 2, 2}, d), 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (std::size_t yy = 0; yy < 4; ++yy)
    for (std::size_t xx = 0; xx < 4; ++xx) {
      EXPECT_EQ(y.at(0, 0, yy, xx), float((yy % 2) * 2 + xx % 2));
    }
}

TEST(PixelShuffle, InverseIsBitwiseIdentity) {
  Rng rng = derive_rng(3, 0);
  const Tensor x = random_tensor({2, 8, 3, 5}, rng);
  const Tensor back = ops::pixel_unshuffle(ops::pixel_shuffle(x, 2), 2);
  ASSERT_EQ(back.shape(), x.shape());
  EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), back.data().begin()));
}

TEST(PixelShuffle, PreservesMultiset) {
  Rng rng = derive_rng(4, 0);
  const Tensor x = random_tensor({2, 8, 3, 3}, rng);
  const Tensor y = ops::pixel_shuffle(x, 2);
  std::vector<float> a(x.data().begin(), x.data().end());
  std::vector<float> b(y.data().begin(), y.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(PixelShuffle, RejectsIndivisibleChannels) {
  EXPECT_THROW(ops::pixel_shuffle(Tensor::zeros({1, 3, 2, 2}), 2), ContractViolation);
}

TEST(GlobalAvgPool, ConstantAndArithmetic) {
  const Tensor c = ops::global_avg_pool(Tensor::full({2, 3, 4, 5}, 7.0f));
  EXPECT_EQ(c.shape(), (Shape{2, 3, 1, 1}));
  for (float v : c.data()) EXPECT_EQ(v, 7.0f);
  const Tensor m = ops::global_avg_pool(Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 5}));
  EXPECT_FLOAT_EQ(m.item(), 2.75f);
}

TEST(GlobalAvgPool, MatchesScalarMean) {
  Rng rng = derive_rng(5, 0);
  const Tensor x = random_tensor({3, 4, 6, 6}, rng);
  const Tensor m = ops::global_avg_pool(x);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0;
      for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t xx = 0; xx < 6; ++xx) s += x.at(n, c, y, xx);
      EXPECT_NEAR(m.at(n, c, 0, 0), s / 36.0, 1e-6);
    }
}

TEST(GlobalAvgPool, EmptyPlaneRejected) {
  EXPECT_THROW(ops::global_avg_pool(Tensor::zeros({1, 1, 0, 3})), ContractViolation);
}

TEST(Elementwise, Definitions) {
  const Tensor r = ops::relu(Tensor::from_data({1, 1, 1, 2}, {-1.0f, 2.0f}));
  EXPECT_EQ(r.data()[0], 0.0f);
  EXPECT_EQ(r.data()[1], 2.0f);
  EXPECT_EQ(ops::sigmoid(Tensor::scalar(0.0f)).item(), 0.5f);
  const Tensor big = ops::sigmoid(Tensor::from_data({1, 1, 1, 2}, {-80.0f, 80.0f}));
  EXPECT_GE(big.data()[0], 0.0f);
  EXPECT_LE(big.data()[1], 1.0f);
  EXPECT_TRUE(big.all_finite());
}

TEST(Elementwise, AddMatchesScalarLoop) {
  Rng rng = derive_rng(6, 0);
  const Tensor a = random_tensor({2, 3, 4, 4}, rng);
  const Tensor b = random_tensor({2, 3, 4, 4}, rng);
  const Tensor s = ops::elementwise(ops::ElementwiseKind::kAdd, a, b);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    EXPECT_NEAR(s.data()[i], a.data()[i] + b.data()[i], 1e-7);
  }
}

TEST(Elementwise, ShapeMismatchRejected) {
  EXPECT_THROW(ops::add(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 3})),
               ContractViolation);
}

TEST(L1Loss, Examples) {
  Rng rng = derive_rng(7, 0);
  const Tensor a = random_tensor({1, 3, 4, 4}, rng);
  EXPECT_EQ(ops::l1_loss(a, a).item(), 0.0f);
  std::vector<float> shifted(a.data().begin(), a.data().end());
  for (float& v : shifted) v += 0.5f;
  EXPECT_NEAR(ops::l1_loss(a, Tensor::from_data(a.shape(), shifted)).item(), 0.5f, 1e-6);
  EXPECT_EQ(ops::l1_loss(a, Tensor::zeros(a.shape()), Tensor::zeros(a.shape())).item(), 0.0f);
}

TEST(L1Loss, WeightedMean) {
  const Tensor a = Tensor::from_data({1, 1, 1, 4}, {1, 2, 3, 4});
  const Tensor b = Tensor::zeros({1, 1, 1, 4});
  const Tensor w = Tensor::from_data({1, 1, 1, 4}, {1, 0, 0.5f, 0});
  EXPECT_NEAR(ops::l1_loss(a, b, w).item(), (1.0 + 1.5) / 1.5, 1e-6);
}

TEST(Backward, MeanGradientIsUniform) {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::mean(x);
  }
  backward(loss, tape);
  for (float g : x.grad()) EXPECT_EQ(g, 0.25f);
}

TEST(Backward, DisconnectedLeafGetsZeroGradient) {
  Tensor a = Tensor::full({1, 1, 2, 2}, 1.0f, true);
  Tensor b = Tensor::full({1, 1, 2, 2}, 1.0f, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::sum(ops::mul(a, a));
  }
  backward(loss, tape);
  for (float g : b.grad()) EXPECT_EQ(g, 0.0f);
  for (float g : a.grad()) EXPECT_EQ(g, 2.0f);
}

TEST(Backward, RejectsNonScalarAndForeignLoss) {
  Tensor x = Tensor::full({1, 1, 2, 2}, 1.0f, true);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = ops::relu(x);
  }
  EXPECT_THROW(backward(y, tape), ContractViolation);
  Tape other;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::mean(x);
  }
  EXPECT_THROW(backward(loss, other), ContractViolation);
  EXPECT_THROW(backward(Tensor::scalar(1.0f), other), ContractViolation);
}

TEST(Backward, ConvL1MatchesFiniteDifferences) {
  Rng rng = derive_rng(8, 0);
  const Tensor x = random_tensor({1, 2, 5, 5}, rng);
  const Tensor w = random_tensor({2, 2, 3, 3}, rng);
  const Tensor t = random_tensor({1, 2, 3, 3}, rng, -3.0f, 3.0f, 0.0f, false);
  // Keep every residual clear of the |.| kink.
  const Tensor y0 = ops::conv2d(x, w, {});
  std::vector<float> td(t.data().begin(), t.data().end());
  for (std::size_t i = 0; i < td.size(); ++i) {
    if (std::abs(y0.data()[i] - td[i]) < 0.05f) td[i] = y0.data()[i] + 0.1f;
  }
  const Tensor target = Tensor::from_data(t.shape(), td);
  const reference::DT td_ref = reference::from(target);
  const auto res = grad_check(
      [&](const std::vector<Tensor>& in) {
        return ops::l1_loss(ops::conv2d(in[0], in[1], {}), target);
      },
      [&](const std::vector<reference::DT>& in) {
        return reference::l1(reference::conv2d(in[0], in[1], nullptr, 1, 0, 1), td_ref);
      },
      {x, w}, 9);
  EXPECT_TRUE(res.ok()) << res.worst << " max " << res.max_rel;
}

TEST(Backward, DeterministicGradients) {
  auto run = [] {
    Rng rng = derive_rng(10, 0);
    Tensor x = random_tensor({2, 3, 6, 6}, rng);
    Tensor w = random_tensor({4, 3, 3, 3}, rng);
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = ops::mean(ops::sigmoid(ops::conv2d(x, w, {}, {1, 1, 1})));
    }
    backward(loss, tape);
    std::vector<float> g(w.grad().begin(), w.grad().end());
    g.insert(g.end(), x.grad().begin(), x.grad().end());
    return g;
  };
  EXPECT_EQ(run(), run());
}

struct OpCase {
  const char* name;
  std::function<testing::GradCheckResult(std::uint64_t)> check;
};

namespace R = reference;
using In = std::vector<Tensor>;
using RIn = std::vector<R::DT>;

Tensor rand_in(Shape s, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f,
               float gap = 0.0f) {
  Rng rng = derive_rng(seed, s.numel());
  return random_tensor(s, rng, lo, hi, gap);
}

std::vector<OpCase> op_cases() {
  return {
      {"conv2d",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::conv2d(in[0], in[1], in[2], {1, 1, 1}); },
                           [](const RIn& in) { return R::conv2d(in[0], in[1], &in[2], 1, 1, 1); },
                           {rand_in({2, 3, 6, 6}, s), rand_in({4, 3, 3, 3}, s + 1), rand_in({4, 1, 1, 1}, s + 2)}, s);
       }},
      {"conv2d_strided_dilated",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::conv2d(in[0], in[1], in[2], {2, 2, 2}); },
                           [](const RIn& in) { return R::conv2d(in[0], in[1], &in[2], 2, 2, 2); },
                           {rand_in({1, 4, 8, 8}, s), rand_in({2, 4, 3, 3}, s + 1), rand_in({2, 1, 1, 1}, s + 2)}, s);
       }},
      {"conv2d_1x1_no_bias",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::conv2d(in[0], in[1], {}); },
                           [](const RIn& in) { return R::conv2d(in[0], in[1], nullptr, 1, 0, 1); },
                           {rand_in({2, 4, 5, 3}, s), rand_in({3, 4, 1, 1}, s + 1)}, s);
       }},
      {"reflect_pad",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::reflect_pad(in[0], 2); },
                           [](const RIn& in) { return R::reflect_pad(in[0], 2); },
                           {rand_in({2, 2, 4, 5}, s)}, s);
       }},
      {"pixel_shuffle",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::pixel_shuffle(in[0], 2); },
                           [](const RIn& in) { return R::pixel_shuffle(in[0], 2); },
                           {rand_in({2, 4, 3, 3}, s)}, s);
       }},
      {"pixel_unshuffle",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::pixel_unshuffle(in[0], 2); },
                           [](const RIn& in) { return R::pixel_unshuffle(in[0], 2); },
                           {rand_in({1, 2, 4, 6}, s)}, s);
       }},
      {"global_avg_pool",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::global_avg_pool(in[0]); },
                           [](const RIn& in) { return R::gap(in[0]); },
                           {rand_in({2, 4, 4, 4}, s)}, s);
       }},
      {"add",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::add(in[0], in[1]); },
                           [](const RIn& in) { return R::add(in[0], in[1]); },
                           {rand_in({2, 2, 4, 4}, s), rand_in({2, 2, 4, 4}, s + 1)}, s);
       }},
      {"sub",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::sub(in[0], in[1]); },
                           [](const RIn& in) { return R::sub(in[0], in[1]); },
                           {rand_in({1, 3, 4, 4}, s), rand_in({1, 3, 4, 4}, s + 1)}, s);
       }},
      {"mul",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::mul(in[0], in[1]); },
                           [](const RIn& in) { return R::mul(in[0], in[1]); },
                           {rand_in({2, 2, 3, 5}, s), rand_in({2, 2, 3, 5}, s + 1)}, s);
       }},
      {"relu",
       [](std::uint64_t s) {
         // |x| >= 0.01 keeps the kink outside every +-h interval.
         return grad_check([](const In& in) { return ops::relu(in[0]); },
                           [](const RIn& in) { return R::relu(in[0]); },
                           {rand_in({2, 4, 4, 4}, s, -1.0f, 1.0f, 0.01f)}, s);
       }},
      {"sigmoid",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::sigmoid(in[0]); },
                           [](const RIn& in) { return R::sigmoid(in[0]); },
                           {rand_in({2, 4, 4, 4}, s, -4.0f, 4.0f)}, s);
       }},
      {"scale",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::scale(in[0], -1.7f); },
                           [](const RIn& in) { return R::scale(in[0], double(-1.7f)); },
                           {rand_in({1, 4, 8, 8}, s)}, s);
       }},
      {"scale_channels",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::scale_channels(in[0], in[1]); },
                           [](const RIn& in) { return R::scale_channels(in[0], in[1]); },
                           {rand_in({2, 3, 4, 4}, s), rand_in({2, 3, 1, 1}, s + 1)}, s);
       }},
      {"concat_channels",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::concat_channels({in[0], in[1]}); },
                           [](const RIn& in) { return R::concat({in[0], in[1]}); },
                           {rand_in({2, 1, 3, 3}, s), rand_in({2, 3, 3, 3}, s + 1)}, s);
       }},
      {"slice_channels",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::slice_channels(in[0], 1, 2); },
                           [](const RIn& in) { return R::slice(in[0], 1, 2); },
                           {rand_in({2, 4, 3, 3}, s)}, s);
       }},
      {"reshape",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::reshape(in[0], {1, 4, 6, 1}); },
                           [](const RIn& in) { return R::reshape(in[0], {1, 4, 6, 1}); },
                           {rand_in({1, 2, 3, 4}, s)}, s);
       }},
      {"feature_axis_conv",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::feature_axis_conv(in[0], in[1]); },
                           [](const RIn& in) { return R::feature_axis_conv(in[0], in[1]); },
                           {rand_in({2, 3, 4, 1}, s), rand_in({1, 1, 1, 3}, s + 1)}, s);
       }},
      {"softmax_channels",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::softmax_channels(in[0]); },
                           [](const RIn& in) { return R::softmax_channels(in[0]); },
                           {rand_in({2, 3, 4, 2}, s, -2.0f, 2.0f)}, s);
       }},
      {"mean",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::mean(in[0]); },
                           [](const RIn& in) { return R::mean(in[0]); },
                           {rand_in({2, 4, 8, 8}, s)}, s);
       }},
      {"sum",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::sum(in[0]); },
                           [](const RIn& in) { return R::sum(in[0]); },
                           {rand_in({2, 3, 5, 5}, s)}, s);
       }},
      {"l1_loss",
       [](std::uint64_t s) {
         // a > 0 > b with a gap, so no residual is near the |.| kink.
         return grad_check([](const In& in) { return ops::l1_loss(in[0], in[1]); },
                           [](const RIn& in) { return R::l1(in[0], in[1]); },
                           {rand_in({2, 3, 4, 4}, s, 0.0f, 1.0f, 0.1f),
                            rand_in({2, 3, 4, 4}, s + 1, -1.0f, 0.0f, 0.1f)}, s);
       }},
      {"l1_loss_weighted",
       [](std::uint64_t s) {
         Rng rng = derive_rng(s, 99);
         const Tensor w = random_tensor({1, 2, 4, 4}, rng, 0.0f, 1.0f, 0.0f, false);
         const R::DT wd = R::from(w);
         return grad_check([w](const In& in) { return ops::l1_loss(in[0], in[1], w); },
                           [wd](const RIn& in) { return R::l1(in[0], in[1], &wd); },
                           {rand_in({1, 2, 4, 4}, s, 0.0f, 1.0f, 0.1f),
                            rand_in({1, 2, 4, 4}, s + 1, -1.0f, 0.0f, 0.1f)}, s);
       }},
      {"mse_loss",
       [](std::uint64_t s) {
         return grad_check([](const In& in) { return ops::mse_loss(in[0], in[1]); },
                           [](const RIn& in) { return R::mse(in[0], in[1]); },
                           {rand_in({2, 2, 4, 4}, s), rand_in({2, 2, 4, 4}, s + 1)}, s);
       }},
  };
}

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const OpCase c = op_cases()[GetParam()];
  for (std::uint64_t seed : {11u, 12u}) {
    const auto res = c.check(seed);
    EXPECT_TRUE(res.ok()) << c.name << " seed " << seed << ": " << res.worst << " (max "
                          << res.max_rel << ", " << res.failures << "/" << res.checked << ")";
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range<std::size_t>(0, op_cases().size()),
                         [](const auto& info) { return std::string(op_cases()[info.param].name); });

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::full({1, 1, 2, 2}, 1.0f, true);
  for (float& g : p.mutable_grad()) g = 0.37f;
  std::vector<Tensor> params{p};
  AdamState st = AdamState::for_params(params, {.lr = 1e-3f});
  adam_step(params, st);
  EXPECT_EQ(st.t, 1u);
  for (float v : p.data()) {
    const double delta = 1.0 - v;
    EXPECT_GE(delta, 0.99e-3 * (1 - 1e-5));
    EXPECT_LE(delta, 1e-3 * (1 + 1e-5));
  }
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  Tensor p = Tensor::full({1, 1, 1, 3}, 2.0f, true);
  std::vector<Tensor> params{p};
  AdamState st = AdamState::for_params(params);
  adam_step(params, st);
  for (float v : p.data()) EXPECT_EQ(v, 2.0f);

  st.m[0] = {0.5f, 0.5f, 0.5f};
  st.v[0] = {0.25f, 0.25f, 0.25f};
  adam_step(params, st);
  EXPECT_FLOAT_EQ(st.m[0][0], 0.45f);
  EXPECT_FLOAT_EQ(st.v[0][0], 0.24975f);
}

TEST(Adam, ScalarQuadraticTrace) {
  Tensor x = Tensor::full({1, 1, 1, 1}, 1.0f, true);
  std::vector<Tensor> params{x};
  AdamState st = AdamState::for_params(params, {.lr = 0.1f});
  double xr = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    x.mutable_grad()[0] = 2.0f * x.data()[0];
    adam_step(params, st);
    const double g = 2.0 * xr;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    xr -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(x.data()[0], xr, 1e-6) << "step " << t;
  }
}

TEST(Adam, MissingGradientRejected) {
  std::vector<Tensor> params{Tensor::zeros({1, 1, 1, 2})};
  AdamState st = AdamState::for_params(params);
  EXPECT_THROW(adam_step(params, st), ContractViolation);
}

TEST(LrSchedule, StepwiseDecay) {
  EXPECT_DOUBLE_EQ(lr_schedule(1e-4, 0), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(1e-4, 999), 1e-4);
  EXPECT_NEAR(lr_schedule(1e-4, 2000), 1e-4 * 0.9801, 1e-16);
}

}  // namespace
}  // namespace hfe
