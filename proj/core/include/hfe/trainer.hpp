#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hfe/dataset.hpp"
#include "hfe/gms.hpp"
#include "hfe/highpass.hpp"
#include "hfe/network.hpp"
#include "hfe/optim.hpp"

namespace hfe {

struct LossWeights {
  double l1 = 1.0;
  double hf = 0.0;

  bool operator==(const LossWeights&) const = default;
};

struct FinetuneConfig {
  std::size_t steps = 0;
  double base_lr = 1e-5;
  GmsMaskConfig mask;

  bool operator==(const FinetuneConfig&) const = default;
};

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t patch_size = 192;
  double base_lr = 1e-4;
  double lr_decay = 0.99;
  std::size_t decay_every = 1000;
  std::size_t max_steps = 0;
  LossWeights weights;
  std::size_t psnr_every = 50;  // 0 disables the periodic PSNR column
  FinetuneConfig finetune;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LogRow {
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double psnr = std::numeric_limits<double>::quiet_NaN();  // NaN when not measured
};

// Optimiser state and position of a run; also what a resume starts from.
struct TrainState {
  AdamState adam;
  std::uint64_t step = 0;
};

struct TrainResult {
  TrainState state;
  std::vector<LogRow> log;
};

// One optimiser update on lambda_l1 * L1 + lambda_hf * L_hf. A defined
// weight_map (same shape as the output) turns L1 into its weighted mean.
// Returns the loss before the update.
double train_step(ModelParams& params, AdamState& adam, const Batch& batch,
                  double lr, const LossWeights& weights, const PhiNetwork* phi,
                  const Tensor& weight_map = {}, Tensor* output = nullptr);

// Soft GMS weights between `output` and `target`, broadcast to their shape.
Tensor gms_weight_map(const Tensor& output, const Tensor& target,
                      const GmsMaskConfig& cfg);

// Forward, soft GMS weights from the detached output, then one step on the
// weighted L1 loss. `mask_out` receives the weights when non-null.
double masked_train_step(ModelParams& params, AdamState& adam, const Batch& batch,
                         double lr, const GmsMaskConfig& cfg,
                         Tensor* mask_out = nullptr);

// Runs steps [state.step, cfg.max_steps). Throws NumericError naming step,
// lr and batch items when the loss stops being finite.
TrainResult train(ModelParams& params, const TrainConfig& cfg,
                  const DatasetIndex& data, const PhiNetwork* phi = nullptr,
                  std::optional<TrainState> resume = std::nullopt);

// cfg.finetune.steps masked updates continuing from `state`.
TrainResult masked_finetune(ModelParams& params, const TrainConfig& cfg,
                            const DatasetIndex& data, TrainState state);

std::string log_to_csv(const std::vector<LogRow>& log);
void write_log_csv(const std::filesystem::path& path, const std::vector<LogRow>& log);

// PSNR of the clipped output against the target over a whole batch.
double batch_psnr(const Tensor& output, const Tensor& target);

}  // namespace hfe
