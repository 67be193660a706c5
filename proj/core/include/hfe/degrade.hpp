#pragma once

#include <cstdint>
#include <vector>

#include "hfe/image.hpp"
#include "hfe/random.hpp"

namespace hfe {

// Odd-sized, non-negative, unit-sum 2-D blur kernel.
struct BlurKernel {
  std::size_t size = 0;
  std::vector<float> weights;  // size x size, row-major
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double angle = 0.0;

  float at(std::size_t y, std::size_t x) const { return weights[y * size + x]; }
};

// Adds i.i.d. N(0, (sigma_255/255)^2) noise and clips to [0, 1].
ImageBuffer add_awgn(const ImageBuffer& img, double sigma_255,
                     std::uint64_t seed);

// Gaussian with standard deviations sigma_x / sigma_y along axes rotated by
// `angle` radians, sampled at integer offsets and normalised to unit sum.
BlurKernel gaussian_kernel(std::size_t size, double sigma_x, double sigma_y,
                           double angle);
// Wraps arbitrary weights after validating size, sign and normalisation.
BlurKernel kernel_from_weights(std::size_t size, std::vector<float> weights);

// Training pool: size in {7, 9, 11, 13}, sigmas in [0.6, 3.0], angle in [0, pi).
BlurKernel random_blur_kernel(Rng& rng);

// Per-channel 2-D convolution with reflective boundary.
ImageBuffer blur(const ImageBuffer& img, const BlurKernel& kernel);

// Seeded test scene: shaded background, flat shapes with sharp edges and a
// band of oriented texture.
ImageBuffer synthetic_image(std::size_t height, std::size_t width,
                            std::size_t channels, std::uint64_t seed);

}  // namespace hfe
