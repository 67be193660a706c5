#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hfe/checkpoint.hpp"
#include "hfe/config_file.hpp"
#include "hfe/dataset.hpp"
#include "hfe/degrade.hpp"
#include "hfe/error.hpp"
#include "hfe/gms.hpp"
#include "hfe/highpass.hpp"
#include "hfe/metrics.hpp"
#include "hfe/trainer.hpp"

namespace fs = std::filesystem;
using namespace hfe;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kNumeric = 4,
  kCheckpoint = 5,
};

class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Files of `test` matched to `ref` by file name.
std::vector<std::pair<fs::path, fs::path>> pair_dirs(const fs::path& ref,
                                                     const fs::path& test) {
  std::vector<std::pair<fs::path, fs::path>> out;
  for (const fs::path& r : list_pngs(ref)) {
    const fs::path t = test / r.filename();
    if (!fs::exists(t)) throw IoError(t.string(), "no counterpart for " + r.string());
    out.emplace_back(r, t);
  }
  if (out.empty()) throw IoError(ref.string(), "no PNG files");
  return out;
}

void prepare_output_dir(const fs::path& out, const std::vector<fs::path>& inputs) {
  std::error_code ec;
  for (const fs::path& in : inputs) {
    if (fs::exists(out) && fs::equivalent(out, in, ec)) {
      throw UsageError("output directory must differ from input " + in.string());
    }
  }
  fs::create_directories(out, ec);
  if (ec) throw IoError(out.string(), ec.message());
}

std::uint64_t item_seed(std::uint64_t seed, std::size_t index) {
  Rng rng = derive_rng(seed, index);
  return rng();
}

ImageBuffer channels_like(const ImageBuffer& rgb, std::size_t channels) {
  if (channels == 3) return rgb;
  ImageBuffer out(rgb.height, rgb.width, 1);
  out.pixels = to_luma(rgb).values;
  return out;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string input, output, mode = "awgn";
  double sigma = 10.0;
  std::uint64_t seed = 0;
  std::size_t scale = 1;
};

int run_synth(const SynthArgs& a) {
  const fs::path in = fs::absolute(a.input);
  const fs::path out = fs::absolute(a.output);
  if (a.sigma < 0.0) throw UsageError("--sigma must be >= 0");
  const auto files = list_pngs(in);
  if (files.empty()) throw IoError(in.string(), "no PNG files");
  prepare_output_dir(out, {in});
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const ImageBuffer clean = load_image(files[i]);
    const std::uint64_t seed = item_seed(a.seed, i);
    ImageBuffer degraded;
    if (a.mode == "awgn") {
      degraded = add_awgn(clean, a.sigma, seed);
    } else {
      BlurKernel k;
      if (a.sigma > 0.0) {
        const std::size_t size = 2 * static_cast<std::size_t>(std::ceil(3.0 * a.sigma)) + 1;
        k = gaussian_kernel(std::max<std::size_t>(size, 3), a.sigma, a.sigma, 0.0);
      } else {
        Rng rng = derive_rng(seed, 1);
        k = random_blur_kernel(rng);
      }
      degraded = blur(clean, k);
    }
    const fs::path dst = out / files[i].filename();
    save_image(degraded, dst);
    manifest.push_back({dst, files[i]});
  }
  write_manifest(out / "manifest.tsv", manifest);
  std::printf("wrote %zu images and %s\n", files.size(),
              (out / "manifest.tsv").string().c_str());
  return kOk;
}

// --- train-phi ---------------------------------------------------------------

struct PhiArgs {
  std::string data, out;
  double cutoff = 0.25;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  PhiTrainOptions options;
};

int run_train_phi(PhiArgs a) {
  std::vector<ImageBuffer> images;
  for (const ManifestEntry& e : read_manifest(a.data)) images.push_back(load_image(e.target));
  if (images.empty()) throw UsageError("manifest " + a.data + " lists no images");
  a.options.steps = a.steps;
  a.options.seed = a.seed;
  const PhiTrainResult r = train_phi(images, HighPassSpec{a.cutoff}, a.options);
  save_phi(a.out, r.phi);
  std::printf("initial oracle MSE %.8g\nfinal oracle MSE %.8g\n", r.initial_mse,
              r.final_mse);
  return kOk;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, phi, resume, out, log;
};

int run_train(const TrainArgs& a) {
  const RunConfig rc = load_run_config(a.config);
  const TrainConfig& cfg = rc.train;
  const std::size_t s = rc.network.sr_scale;
  if (cfg.patch_size % (s * rc.network.spatial_multiple()) != 0) {
    throw UsageError("train.patch_size must be a multiple of " +
                     std::to_string(s * rc.network.spatial_multiple()));
  }
  std::optional<PhiNetwork> phi;
  if (!a.phi.empty()) phi = load_phi(a.phi);
  if (cfg.weights.hf > 0.0 && !phi) throw UsageError("hf_weight > 0 requires --phi");

  const DatasetIndex data = DatasetIndex::from_manifest(
      a.data, {.patch_size = cfg.patch_size, .scale = s, .seed = cfg.seed, .augment = true});
  if (data.empty()) throw UsageError("no usable training pairs in " + a.data);

  ModelParams params;
  std::optional<TrainState> resume;
  if (!a.resume.empty()) {
    LoadedModel m = load_checkpoint_for(a.resume, rc.network);
    params = std::move(m.params);
    if (m.adam) resume = TrainState{std::move(*m.adam), m.step};
  } else {
    params = build(rc.network);
  }

  TrainResult result = train(params, cfg, data, phi ? &*phi : nullptr, std::move(resume));
  std::vector<LogRow> log = std::move(result.log);
  if (cfg.finetune.steps > 0) {
    TrainResult ft = masked_finetune(params, cfg, data, std::move(result.state));
    log.insert(log.end(), ft.log.begin(), ft.log.end());
    result.state = std::move(ft.state);
  }
  save_checkpoint(a.out, params, &result.state.adam, result.state.step);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".csv") : fs::path(a.log);
  write_log_csv(log_path, log);
  if (!log.empty()) {
    std::printf("step %llu loss %.6g\n",
                static_cast<unsigned long long>(result.state.step), log.back().loss);
  }
  std::printf("wrote %s and %s\n", a.out.c_str(), log_path.string().c_str());
  return kOk;
}

// --- enhance -----------------------------------------------------------------

struct EnhanceArgs {
  std::string model, input, output;
};

int run_enhance(const EnhanceArgs& a) {
  const LoadedModel m = load_checkpoint(a.model);
  const fs::path in = fs::absolute(a.input);
  const fs::path out = fs::absolute(a.output);
  const auto files = list_pngs(in);
  if (files.empty()) throw IoError(in.string(), "no PNG files");
  prepare_output_dir(out, {in});
  const std::size_t mult = m.params.config.spatial_multiple();
  const std::size_t s = m.params.config.sr_scale;
  for (const fs::path& f : files) {
    const ImageBuffer img = load_image(f);
    const ImageBuffer padded = pad_to_multiple(to_rgb(img), mult);
    const Tensor y = forward(m.params, image_to_tensor(padded));
    if (!y.all_finite()) throw NumericError("non-finite output for " + f.string());
    const ImageBuffer full = tensor_to_image(y);
    save_image(channels_like(crop(full, 0, 0, img.height * s, img.width * s), img.channels),
               out / f.filename());
  }
  std::printf("enhanced %zu images into %s\n", files.size(), out.string().c_str());
  return kOk;
}

// --- gms -----------------------------------------------------------------------

struct GmsArgs {
  std::string ref, test, out;
  bool soft = false;
  GmsMaskConfig cfg;
};

int run_gms(const GmsArgs& a) {
  const auto pairs = pair_dirs(a.ref, a.test);
  prepare_output_dir(a.out, {a.ref, a.test});
  spdlog::info("gms: c={} threshold={} element={} sigma={} iterations={}", a.cfg.c,
               a.cfg.threshold, a.cfg.element_size, a.cfg.sigma, a.cfg.iterations);
  for (const auto& [ref, test] : pairs) {
    const ImageBuffer hr = load_image(ref);
    const ImageBuffer sr = load_image(test);
    if (!hr.same_shape(sr)) throw UsageError("shape mismatch for " + ref.string());
    const std::string stem = ref.stem().string();
    if (a.soft) {
      const GmsMaskStages st = gms_mask_stages(hr, sr, a.cfg);
      save_plane(st.gms, fs::path(a.out) / (stem + "_gms.png"));
      save_plane(mask_to_plane(st.hard), fs::path(a.out) / (stem + "_hard.png"));
      save_plane(st.soft, fs::path(a.out) / (stem + "_soft.png"));
    } else {
      const GmsMap g = gms_map(hr, sr, a.cfg.c);
      const BinaryMask hard =
          open(binarize(g, a.cfg.threshold), StructuringElement::square(a.cfg.element_size));
      save_plane(g, fs::path(a.out) / (stem + "_gms.png"));
      save_plane(mask_to_plane(hard), fs::path(a.out) / (stem + "_hard.png"));
    }
  }
  std::printf("wrote masks for %zu pairs into %s\n", pairs.size(), a.out.c_str());
  return kOk;
}

// --- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string ref, test, out;
  bool luma = false;
};

int run_eval(const EvalArgs& a) {
  MetricReport report;
  for (const auto& [ref, test] : pair_dirs(a.ref, a.test)) {
    const ImageBuffer hr = load_image(ref);
    const ImageBuffer sr = load_image(test);
    if (!hr.same_shape(sr)) throw UsageError("shape mismatch for " + ref.string());
    report.add(ref.filename().string(),
               psnr(hr, sr, a.luma ? PsnrMode::kLuma : PsnrMode::kRgb), ssim(hr, sr));
  }
  report.write_csv(a.out);
  std::printf("mean PSNR %.4f dB, mean SSIM %.5f over %zu images\n", report.mean_psnr(),
              report.mean_ssim(), report.rows.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-frequency-aware image enhancement toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Degrade a folder of PNGs and write a manifest");
  c_synth->add_option("--input", synth.input, "Clean PNG directory")->required();
  c_synth->add_option("--output", synth.output, "Destination directory")->required();
  c_synth->add_option("--mode", synth.mode, "awgn or blur")
      ->check(CLI::IsMember({"awgn", "blur"}));
  c_synth->add_option("--sigma", synth.sigma,
                      "Noise std on the 0-255 scale, or blur std in pixels "
                      "(0 draws a random kernel)");
  c_synth->add_option("--seed", synth.seed, "Random seed");

  PhiArgs phi;
  auto* c_phi = app.add_subcommand("train-phi", "Train the high-pass filtering network");
  c_phi->add_option("--data", phi.data, "Manifest; target images are used")->required();
  c_phi->add_option("--cutoff", phi.cutoff, "Cutoff as a fraction of Nyquist")
      ->check(CLI::Range(0.0, 1.0));
  c_phi->add_option("--steps", phi.steps, "Optimiser steps");
  c_phi->add_option("--out", phi.out, "Output checkpoint")->required();
  c_phi->add_option("--seed", phi.seed, "Random seed");
  c_phi->add_option("--lr", phi.options.lr, "Adam learning rate");
  c_phi->add_option("--batch", phi.options.batch_size, "Crops per step");
  c_phi->add_option("--crop", phi.options.crop, "Crop size");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the enhancement network");
  c_train->add_option("--config", tr.config, "INI run configuration")->required();
  c_train->add_option("--data", tr.data, "Training manifest")->required();
  c_train->add_option("--phi", tr.phi, "Frozen high-pass network checkpoint");
  c_train->add_option("--resume", tr.resume, "Checkpoint to continue from");
  c_train->add_option("--out", tr.out, "Output checkpoint")->required();
  c_train->add_option("--log", tr.log, "CSV log path (default: <out>.csv)");

  EnhanceArgs en;
  auto* c_enh = app.add_subcommand("enhance", "Run a trained model over a folder");
  c_enh->add_option("--model", en.model, "Model checkpoint")->required();
  c_enh->add_option("--input", en.input, "Input PNG directory")->required();
  c_enh->add_option("--output", en.output, "Output directory")->required();

  GmsArgs gm;
  auto* c_gms = app.add_subcommand("gms", "Write GMS, hard and soft mask PNGs");
  c_gms->add_option("--ref", gm.ref, "Reference directory")->required();
  c_gms->add_option("--test", gm.test, "Test directory")->required();
  c_gms->add_option("--out", gm.out, "Output directory")->required();
  c_gms->add_flag("--soft", gm.soft, "Also write the soft mask");
  c_gms->add_option("--c", gm.cfg.c, "Stability constant on the 0-255 scale");
  c_gms->add_option("--threshold", gm.cfg.threshold, "Binarisation threshold");
  c_gms->add_option("--element", gm.cfg.element_size, "Square structuring element size");
  c_gms->add_option("--sigma", gm.cfg.sigma, "Soften blur sigma");
  c_gms->add_option("--iterations", gm.cfg.iterations, "Soften iterations");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "PSNR / SSIM report");
  c_eval->add_option("--ref", ev.ref, "Reference directory")->required();
  c_eval->add_option("--test", ev.test, "Test directory")->required();
  c_eval->add_option("--out", ev.out, "CSV report path")->required();
  c_eval->add_flag("--luma", ev.luma, "PSNR on luma instead of RGB");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (c_synth->parsed()) return run_synth(synth);
    if (c_phi->parsed()) return run_train_phi(phi);
    if (c_train->parsed()) return run_train(tr);
    if (c_enh->parsed()) return run_enhance(en);
    if (c_gms->parsed()) return run_gms(gm);
    if (c_eval->parsed()) return run_eval(ev);
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kCheckpoint;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumeric;
  } catch (const Error& e) {
    // Bad configuration values and violated preconditions are usage errors.
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  }
  return kUsage;
}
