#include "hfe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

#include "hfe/error.hpp"
#include "hfe/metrics.hpp"

namespace hfe {

namespace {

Tensor weighted(const Tensor& loss, double w) {
  return w == 1.0 ? loss : ops::scale(loss, static_cast<float>(w));
}

std::string join_items(const std::vector<std::size_t>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(items[i]);
  }
  return out;
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double apply_update(ModelParams& params, AdamState& adam, Tape& tape,
                    const Tensor& loss, double lr) {
  const double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("non-finite loss");
  tape.backward(loss);
  std::vector<Tensor> trainable = params.trainable();
  for (const Tensor& t : trainable) {
    for (float g : t.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient");
    }
  }
  adam.hyper.lr = static_cast<float>(lr);
  adam_step(trainable, adam);
  return value;
}

void zero_grads(const ModelParams& params) {
  for (Tensor t : params.trainable()) t.zero_grad();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (patch_size < 1) throw ConfigError("train: patch_size must be >= 1");
  if (!(base_lr > 0.0)) throw ConfigError("train: base_lr must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw ConfigError("train: lr_decay must lie in (0, 1]");
  }
  if (decay_every < 1) throw ConfigError("train: decay_every must be >= 1");
  if (weights.l1 < 0.0 || weights.hf < 0.0) {
    throw ConfigError("train: loss weights must be >= 0");
  }
  if (!(weights.l1 > 0.0 || weights.hf > 0.0)) {
    throw ConfigError("train: at least one loss weight must be > 0");
  }
  if (finetune.steps > 0 && !(finetune.base_lr > 0.0)) {
    throw ConfigError("finetune: base_lr must be > 0");
  }
  if (!(finetune.mask.threshold > 0.0 && finetune.mask.threshold < 1.0)) {
    throw ConfigError("finetune: threshold must lie in (0, 1)");
  }
  if (finetune.mask.element_size % 2 == 0) {
    throw ConfigError("finetune: element_size must be odd");
  }
  if (!(finetune.mask.sigma > 0.0) || finetune.mask.iterations < 1 ||
      !(finetune.mask.c > 0.0)) {
    throw ConfigError("finetune: sigma, c and iterations must be positive");
  }
}

double train_step(ModelParams& params, AdamState& adam, const Batch& batch,
                  double lr, const LossWeights& weights, const PhiNetwork* phi,
                  const Tensor& weight_map, Tensor* output) {
  if (weights.hf > 0.0 && phi == nullptr) {
    throw ContractViolation("train_step: hf weight > 0 needs a phi network");
  }
  zero_grads(params);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    const Tensor out = forward(params, batch.degraded);
    if (weights.l1 > 0.0) {
      loss = weighted(ops::l1_loss(out, batch.target, weight_map), weights.l1);
    }
    if (weights.hf > 0.0) {
      const Tensor hf = weighted(hf_loss(*phi, out, batch.target), weights.hf);
      loss = loss.defined() ? ops::add(loss, hf) : hf;
    }
    if (output) *output = out;
  }
  return apply_update(params, adam, tape, loss, lr);
}

Tensor gms_weight_map(const Tensor& output, const Tensor& target,
                      const GmsMaskConfig& cfg) {
  const Shape& s = output.shape();
  if (s != target.shape()) {
    throw ContractViolation("gms_weight_map: shape mismatch " + s.str() + " vs " +
                            target.shape().str());
  }
  std::vector<float> data(s.numel());
  for (std::size_t n = 0; n < s.n; ++n) {
    const SoftMask mask =
        make_soft_gms_mask(tensor_to_image(target, n), tensor_to_image(output, n), cfg);
    for (std::size_t c = 0; c < s.c; ++c) {
      std::copy(mask.values.begin(), mask.values.end(),
                data.begin() + (n * s.c + c) * s.plane());
    }
  }
  return Tensor::from_data(s, std::move(data));
}

double masked_train_step(ModelParams& params, AdamState& adam, const Batch& batch,
                         double lr, const GmsMaskConfig& cfg, Tensor* mask_out) {
  zero_grads(params);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    const Tensor out = forward(params, batch.degraded);
    // Built from raw values, so the mask itself carries no gradient.
    const Tensor mask = gms_weight_map(out, batch.target, cfg);
    loss = ops::l1_loss(out, batch.target, mask);
    if (mask_out) *mask_out = mask;
  }
  return apply_update(params, adam, tape, loss, lr);
}

double batch_psnr(const Tensor& output, const Tensor& target) {
  if (output.shape() != target.shape()) {
    throw ContractViolation("batch_psnr: shape mismatch");
  }
  const auto a = output.data();
  const auto b = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::clamp(static_cast<double>(a[i]), 0.0, 1.0) - b[i];
    acc += d * d;
  }
  return psnr_from_mse(acc / static_cast<double>(a.size()));
}

TrainResult train(ModelParams& params, const TrainConfig& cfg,
                  const DatasetIndex& data, const PhiNetwork* phi,
                  std::optional<TrainState> resume) {
  cfg.validate();
  if (data.empty()) throw ContractViolation("train: dataset is empty");
  TrainResult result;
  if (resume) {
    result.state = std::move(*resume);
    if (result.state.adam.m.size() != params.trainable().size()) {
      throw ContractViolation("train: resumed optimiser tracks " +
                              std::to_string(result.state.adam.m.size()) +
                              " tensors, model has " +
                              std::to_string(params.trainable().size()));
    }
  } else {
    result.state.adam = AdamState::for_params(params.trainable());
  }
  TrainState& st = result.state;
  for (; st.step < cfg.max_steps; ++st.step) {
    const double lr = lr_schedule(cfg.base_lr, st.step, cfg.lr_decay, cfg.decay_every);
    const Batch batch = data.sample_batch(st.step, cfg.batch_size);
    Tensor out;
    LogRow row{st.step, lr, 0.0};
    try {
      row.loss = train_step(params, st.adam, batch, lr, cfg.weights, phi, {}, &out);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(st.step) +
                         ", lr " + format_g(lr) + ", batch items [" +
                         join_items(batch.items) + "]");
    }
    if (cfg.psnr_every > 0 && (st.step + 1) % cfg.psnr_every == 0) {
      row.psnr = batch_psnr(out, batch.target);
      spdlog::info("step {} lr {:.3g} loss {:.6f} psnr {:.3f}", st.step + 1, lr,
                   row.loss, row.psnr);
    }
    result.log.push_back(row);
  }
  return result;
}

TrainResult masked_finetune(ModelParams& params, const TrainConfig& cfg,
                            const DatasetIndex& data, TrainState state) {
  cfg.validate();
  if (data.empty()) throw ContractViolation("masked_finetune: dataset is empty");
  if (state.adam.m.size() != params.trainable().size()) {
    state.adam = AdamState::for_params(params.trainable());
  }
  TrainResult result;
  result.state = std::move(state);
  TrainState& st = result.state;
  for (std::size_t i = 0; i < cfg.finetune.steps; ++i, ++st.step) {
    const double lr = lr_schedule(cfg.finetune.base_lr, i, cfg.lr_decay, cfg.decay_every);
    const Batch batch = data.sample_batch(st.step, cfg.batch_size);
    LogRow row{st.step, lr, 0.0};
    try {
      row.loss = masked_train_step(params, st.adam, batch, lr, cfg.finetune.mask);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " during finetune at step " +
                         std::to_string(st.step) + ", lr " + format_g(lr) +
                         ", batch items [" + join_items(batch.items) + "]");
    }
    result.log.push_back(row);
  }
  return result;
}

std::string log_to_csv(const std::vector<LogRow>& log) {
  std::string out = "step,lr,loss,psnr\n";
  for (const LogRow& r : log) {
    out += std::to_string(r.step) + "," + format_g(r.lr) + "," + format_g(r.loss) + ",";
    if (!std::isnan(r.psnr)) out += format_g(r.psnr);
    out += "\n";
  }
  return out;
}

void write_log_csv(const std::filesystem::path& path, const std::vector<LogRow>& log) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string(), "cannot open for writing");
  f << log_to_csv(log);
  if (!f) throw IoError(path.string(), "write failed");
}

}  // namespace hfe
