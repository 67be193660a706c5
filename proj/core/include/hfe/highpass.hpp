#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "hfe/grid.hpp"
#include "hfe/image.hpp"
#include "hfe/layers.hpp"

namespace hfe {

// Unshifted 2-D spectrum: DC at (0, 0), row-major.
struct Spectrum {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::complex<double>> bins;

  std::complex<double>& at(std::size_t u, std::size_t v) { return bins[u * width + v]; }
  const std::complex<double>& at(std::size_t u, std::size_t v) const {
    return bins[u * width + v];
  }
};

// Unnormalised forward transform; any H, W >= 1.
Spectrum fft2(const Plane& plane);
Spectrum fft2(const Spectrum& signal);
// Inverse transform including the 1 / (H W) factor.
Spectrum ifft2_complex(const Spectrum& spec);
// Real part of the inverse transform.
Plane ifft2(const Spectrum& spec);

// Cutoff as a fraction of the Nyquist radius (0.5 cycles per sample).
struct HighPassSpec {
  double cutoff = 0.25;
  void validate() const;
};

// Radial frequency of bin (u, v) in cycles per sample.
double radial_frequency(std::size_t u, std::size_t v, std::size_t height,
                        std::size_t width);

// Ideal filter: bins with radial frequency < cutoff * 0.5 are zeroed.
Plane high_pass_filter(const Plane& plane, const HighPassSpec& spec);
// Per channel; (1, C, H, W), values unclipped.
Tensor high_pass_filter(const ImageBuffer& img, const HighPassSpec& spec);

struct PhiActivations {
  Tensor act1;  // after conv1 + ReLU
  Tensor act2;  // after conv2 + ReLU
  Tensor output;
};

// Three 3x3 convolutions, 3 -> width -> width -> 3, ReLU after the first two.
struct PhiNetwork {
  ConvParams conv1;
  ConvParams conv2;
  ConvParams conv3;
  HighPassSpec spec;
  bool frozen = false;

  static PhiNetwork create(std::uint64_t seed, std::size_t width = 16,
                           HighPassSpec spec = {});

  std::size_t width() const { return conv1.w.shape().n; }
  std::vector<Tensor> tensors() const;
  PhiActivations features(const Tensor& x) const;
  Tensor forward(const Tensor& x) const { return features(x).output; }
  void freeze();
  PhiNetwork clone() const;
};

struct PhiTrainOptions {
  std::size_t steps = 2000;
  std::size_t batch_size = 4;
  std::size_t crop = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t width = 16;
};

struct PhiTrainResult {
  PhiNetwork phi;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  std::vector<double> loss_trace;
};

// Mean squared error of phi against the FFT filter over whole images.
double phi_oracle_mse(const PhiNetwork& phi, const std::vector<ImageBuffer>& images);

// Regresses the FFT high-pass output with Adam on random crops; the returned
// network is frozen.
PhiTrainResult train_phi(const std::vector<ImageBuffer>& images,
                         const HighPassSpec& spec, const PhiTrainOptions& options);

// Sum over phi's two hidden layers of mean |act(sr) - act(hr)|. Only sr
// receives gradients; phi must be frozen.
Tensor hf_loss(const PhiNetwork& phi, const Tensor& sr, const Tensor& hr);

void save_phi(const std::filesystem::path& path, const PhiNetwork& phi);
PhiNetwork load_phi(const std::filesystem::path& path);

}  // namespace hfe
