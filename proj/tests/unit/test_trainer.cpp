#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hfe/degrade.hpp"
#include "hfe/error.hpp"
#include "hfe/metrics.hpp"
#include "hfe/trainer.hpp"

namespace hfe {
namespace {

std::vector<std::vector<float>> snapshot(const ModelParams& p) {
  std::vector<std::vector<float>> out;
  for (const Tensor& t : p.tensors()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

std::vector<std::vector<float>> snapshot(const PhiNetwork& p) {
  std::vector<std::vector<float>> out;
  for (const Tensor& t : p.tensors()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

float max_delta_gap(const std::vector<std::vector<float>>& before, const ModelParams& a, const ModelParams& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  float worst = 0.0f;
  for (std::size_t i = 0; i < ta.size(); ++i)
    for (std::size_t k = 0; k < before[i].size(); ++k) {
      const float da = ta[i].data()[k] - before[i][k];
      const float db = tb[i].data()[k] - before[i][k];
      worst = std::max(worst, std::fabs(da - db));
    }
  return worst;
}

ModelParams desk_model(std::uint64_t seed = 0) {
  NetworkConfig c = NetworkConfig::desk();
  c.seed = seed;
  return build(c);
}

DatasetIndex noisy_set(std::size_t items, std::size_t size, std::size_t patch, std::uint64_t seed = 0) {
  std::vector<std::pair<ImageBuffer, ImageBuffer>> pairs;
  for (std::size_t i = 0; i < items; ++i) {
    const ImageBuffer clean = synthetic_image(size, size, 3, 40 + i);
    pairs.emplace_back(add_awgn(clean, 30.0, 90 + i), clean);
  }
  DatasetOptions opt;
  opt.patch_size = patch;
  opt.seed = seed;
  return DatasetIndex::from_images(std::move(pairs), opt);
}

TrainConfig tiny_config(std::size_t steps) {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.patch_size = 16;
  cfg.max_steps = steps;
  cfg.psnr_every = 5;
  return cfg;
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.weights = {0.0, 0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_decay = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.finetune.mask.element_size = 4;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, ZeroStepsLeavesParametersUntouched) {
  ModelParams p = desk_model();
  const auto before = snapshot(p);
  const TrainResult r = train(p, tiny_config(0), noisy_set(2, 24, 16));
  EXPECT_EQ(snapshot(p), before);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.state.step, 0u);
}

TEST(Train, SameSeedSameTrace) {
  const DatasetIndex data = noisy_set(3, 24, 16);
  ModelParams a = desk_model(), b = desk_model();
  const TrainResult ra = train(a, tiny_config(12), data);
  const TrainResult rb = train(b, tiny_config(12), data);
  ASSERT_EQ(ra.log.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(ra.log[i].loss, rb.log[i].loss);
    EXPECT_EQ(ra.log[i].step, i);
  }
  EXPECT_EQ(snapshot(a), snapshot(b));
  EXPECT_FALSE(std::isnan(ra.log[4].psnr));
  EXPECT_TRUE(std::isnan(ra.log[3].psnr));
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  const DatasetIndex data = noisy_set(3, 24, 16);
  ModelParams straight = desk_model(), split = desk_model();
  const TrainResult full = train(straight, tiny_config(10), data);
  const TrainResult first = train(split, tiny_config(4), data);
  const TrainResult second = train(split, tiny_config(10), data, nullptr, first.state);
  EXPECT_EQ(snapshot(straight), snapshot(split));
  EXPECT_EQ(second.state.step, 10u);
  EXPECT_EQ(second.state.adam.t, full.state.adam.t);
  ASSERT_EQ(second.log.size(), 6u);
  EXPECT_EQ(second.log.back().loss, full.log.back().loss);
}

TEST(Train, ScheduleDrivesLearningRate) {
  TrainConfig cfg = tiny_config(6);
  cfg.decay_every = 2;
  cfg.lr_decay = 0.5;
  ModelParams p = desk_model();
  const TrainResult r = train(p, cfg, noisy_set(2, 24, 16));
  EXPECT_DOUBLE_EQ(r.log[0].lr, 1e-4);
  EXPECT_DOUBLE_EQ(r.log[1].lr, 1e-4);
  EXPECT_DOUBLE_EQ(r.log[2].lr, 5e-5);
  EXPECT_DOUBLE_EQ(r.log[5].lr, 2.5e-5);
}

TEST(Train, FrozenEdgeBankIsBitwiseConstant) {
  NetworkConfig c = NetworkConfig::desk();
  c.edge_trainable = false;
  ModelParams frozen = build(c);
  ModelParams live = desk_model();
  std::vector<std::vector<float>> edges;
  for (const Tensor& w : frozen.edges.weights) edges.emplace_back(w.data().begin(), w.data().end());
  const DatasetIndex data = noisy_set(2, 24, 16);
  train(frozen, tiny_config(20), data);
  train(live, tiny_config(20), data);
  for (std::size_t s = 0; s < edges.size(); ++s) {
    EXPECT_TRUE(std::equal(edges[s].begin(), edges[s].end(), frozen.edges.weights[s].data().begin()));
    EXPECT_FALSE(std::equal(edges[s].begin(), edges[s].end(), live.edges.weights[s].data().begin()));
  }
}

TEST(Train, PhiStaysFrozenUnderHighPassLoss) {
  PhiNetwork phi = PhiNetwork::create(3, 8);
  phi.freeze();
  const auto before = snapshot(phi);
  TrainConfig cfg = tiny_config(100);
  cfg.weights.hf = 0.5;
  ModelParams p = desk_model();
  const TrainResult r = train(p, cfg, noisy_set(2, 24, 16), &phi);
  EXPECT_EQ(snapshot(phi), before);
  EXPECT_TRUE(std::all_of(r.log.begin(), r.log.end(), [](const LogRow& row) { return std::isfinite(row.loss); }));
  ModelParams q = desk_model();
  EXPECT_THROW(train(q, cfg, noisy_set(2, 24, 16), nullptr), ContractViolation);
}

TEST(Train, NonFiniteLossNamesTheStep) {
  ImageBuffer clean = synthetic_image(16, 16, 3, 1);
  ImageBuffer broken = clean;
  broken.pixels[5] = std::numeric_limits<float>::quiet_NaN();
  DatasetOptions opt;
  opt.patch_size = 16;
  const DatasetIndex data = DatasetIndex::from_images({{clean, broken}}, opt);
  ModelParams p = desk_model();
  try {
    train(p, tiny_config(3), data);
    ADD_FAILURE() << "NaN accepted";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("at step 0"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("batch items [0,0]"), std::string::npos) << e.what();
  }
}

TEST(Train, LogCsvLayout) {
  std::vector<LogRow> log{{0, 1e-4, 0.25}, {1, 1e-4, 0.125, 30.5}};
  EXPECT_EQ(log_to_csv(log), "step,lr,loss,psnr\n0,0.0001,0.25,\n1,0.0001,0.125,30.5\n");
}

// ---- masked training ----

Batch batch_of(const DatasetIndex& data) { return data.sample_batch(0, 2); }

TEST(MaskedStep, AllOnesMaskEqualsPlainL1Step) {
  const DatasetIndex data = noisy_set(2, 24, 16);
  const Batch batch = batch_of(data);
  ModelParams a = desk_model(), b = desk_model();
  Rng rng = derive_rng(1, 1);
  uniform_fill(a.tail.w, -0.05f, 0.05f, rng);
  std::copy(a.tail.w.data().begin(), a.tail.w.data().end(), b.tail.w.mutable_data().begin());
  const auto before = snapshot(a);
  AdamState sa = AdamState::for_params(a.trainable()), sb = AdamState::for_params(b.trainable());
  const double la = train_step(a, sa, batch, 1e-4, {}, nullptr);
  const double lb = train_step(b, sb, batch, 1e-4, {}, nullptr, Tensor::full(batch.target.shape(), 1.0f));
  EXPECT_NEAR(la, lb, 1e-7);
  EXPECT_LE(max_delta_gap(before, a, b), 1e-7f);
}

TEST(MaskedStep, ZeroMaskGivesZeroLoss) {
  const Batch batch = batch_of(noisy_set(2, 24, 16));
  ModelParams p = desk_model();
  const auto before = snapshot(p);
  AdamState adam = AdamState::for_params(p.trainable());
  EXPECT_EQ(train_step(p, adam, batch, 1e-4, {}, nullptr, Tensor::zeros(batch.target.shape())), 0.0);
  EXPECT_EQ(snapshot(p), before);
}

TEST(MaskedStep, PerfectReconstructionIsANoOp) {
  // The untrained network is the identity, so degraded == target is perfect.
  DatasetOptions opt;
  opt.patch_size = 16;
  const ImageBuffer img = synthetic_image(24, 24, 3, 5);
  const DatasetIndex data = DatasetIndex::from_images({{img, img}}, opt);
  ModelParams p = desk_model();
  const auto before = snapshot(p);
  AdamState adam = AdamState::for_params(p.trainable());
  Tensor mask;
  EXPECT_EQ(masked_train_step(p, adam, batch_of(data), 1e-4, {}, &mask), 0.0);
  for (float v : mask.data()) EXPECT_LE(v, 0.01f);
  const auto after = snapshot(p);
  for (std::size_t i = 0; i < before.size(); ++i)
    for (std::size_t k = 0; k < before[i].size(); ++k) EXPECT_NEAR(after[i][k], before[i][k], 1e-7f);
}

TEST(MaskedStep, GradientConcentratesInCorruptedHalf) {
  // Left half: a flat offset of the target (no structural error).
  // Right half: the target buried in strong noise.
  const std::size_t n = 48;
  std::vector<float> target(3 * n * n), output(3 * n * n);
  Rng rng = derive_rng(6, 0);
  std::uniform_real_distribution<float> noise(-0.4f, 0.4f);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const std::size_t i = (c * n + y) * n + x;
        target[i] = float(0.4 + 0.15 * std::sin(0.07 * double(x)) + 0.1 * double(y) / double(n));
        output[i] = x < n / 2 ? target[i] + 0.03f : std::clamp(target[i] + noise(rng), 0.0f, 1.0f);
      }
  const Tensor t = Tensor::from_data({1, 3, n, n}, target);
  Tensor o = Tensor::from_data({1, 3, n, n}, output, true);
  const Tensor w = gms_weight_map(o, t, GmsMaskConfig{});
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(ops::l1_loss(o, t, w));
  }
  double corrupted = 0.0, total = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double g = std::fabs(o.grad()[(c * n + y) * n + x]);
        total += g;
        if (x >= n / 2) corrupted += g;
      }
  ASSERT_GT(total, 0.0);
  EXPECT_GE(corrupted / total, 0.8) << corrupted / total;
}

TEST(MaskedFinetune, RunsConfiguredStepsAndContinuesState) {
  const DatasetIndex data = noisy_set(2, 24, 16);
  ModelParams p = desk_model();
  TrainConfig cfg = tiny_config(5);
  const TrainResult base = train(p, cfg, data);
  cfg.finetune.steps = 4;
  const TrainResult tuned = masked_finetune(p, cfg, data, base.state);
  ASSERT_EQ(tuned.log.size(), 4u);
  EXPECT_EQ(tuned.log.front().step, 5u);
  EXPECT_EQ(tuned.state.step, 9u);
  EXPECT_DOUBLE_EQ(tuned.log.front().lr, 1e-5);
  EXPECT_TRUE(std::all_of(tuned.log.begin(), tuned.log.end(), [](const LogRow& r) { return r.loss >= 0.0; }));
}

}  // namespace
}  // namespace hfe
