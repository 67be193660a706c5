#include <benchmark/benchmark.h>

#include "hfe/degrade.hpp"
#include "hfe/gms.hpp"
#include "hfe/highpass.hpp"
#include "hfe/metrics.hpp"
#include "hfe/network.hpp"
#include "hfe/ops.hpp"
#include "hfe/trainer.hpp"

namespace {

using namespace hfe;

Tensor noise(Shape s, std::uint64_t seed) {
  Tensor t = Tensor::zeros(s);
  Rng rng = derive_rng(seed, 0);
  uniform_fill(t, -1.0f, 1.0f, rng);
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  const Tensor x = noise({1, c, hw, hw}, 1), w = noise({c, c, 3, 3}, 2), b = noise({c, 1, 1, 1}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, {.padding = 1}));
  state.SetItemsProcessed(state.iterations() * std::int64_t(c * c * 9 * hw * hw));
}
BENCHMARK(BM_Conv3x3)->Args({8, 48})->Args({16, 64})->Args({64, 48});

void BM_Conv3x3Backward(benchmark::State& state) {
  Tensor x = noise({1, 16, 48, 48}, 1), w = noise({16, 16, 3, 3}, 2);
  x.set_requires_grad(true);
  w.set_requires_grad(true);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(ops::mean(ops::conv2d(x, w, {}, {.padding = 1})));
  }
}
BENCHMARK(BM_Conv3x3Backward);

void BM_Fft2(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Plane p(n, n);
  for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = float(i % 17) / 17.0f;
  for (auto _ : state) benchmark::DoNotOptimize(high_pass_filter(p, HighPassSpec{}));
}
BENCHMARK(BM_Fft2)->Arg(64)->Arg(192)->Arg(191);

void BM_SoftGmsMask(benchmark::State& state) {
  const ImageBuffer hr = synthetic_image(192, 192, 3, 1);
  const ImageBuffer sr = add_awgn(hr, 30.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(make_soft_gms_mask(hr, sr, {}));
}
BENCHMARK(BM_SoftGmsMask);

void BM_Ssim(benchmark::State& state) {
  const ImageBuffer a = synthetic_image(192, 192, 3, 1);
  const ImageBuffer b = add_awgn(a, 10.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_ForwardDesk(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const ModelParams p = build(NetworkConfig::desk());
  const Tensor x = noise({1, 3, hw, hw}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, x));
}
BENCHMARK(BM_ForwardDesk)->Arg(48)->Arg(128);

void BM_TrainStepDesk(benchmark::State& state) {
  ModelParams p = build(NetworkConfig::desk());
  AdamState adam = AdamState::for_params(p.trainable());
  Batch batch{noise({8, 3, 48, 48}, 5), noise({8, 3, 48, 48}, 6), {}};
  for (auto _ : state) benchmark::DoNotOptimize(train_step(p, adam, batch, 1e-4, {}, nullptr));
}
BENCHMARK(BM_TrainStepDesk)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
