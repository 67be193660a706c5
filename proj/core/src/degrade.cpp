#include "hfe/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hfe/error.hpp"

namespace hfe {

ImageBuffer add_awgn(const ImageBuffer& img, double sigma_255,
                     std::uint64_t seed) {
  if (sigma_255 < 0.0) {
    throw ContractViolation("add_awgn: negative sigma");
  }
  ImageBuffer out = img;
  if (sigma_255 == 0.0) return out;
  Rng rng = derive_rng(seed, 0);
  std::normal_distribution<double> noise(0.0, sigma_255 / 255.0);
  for (float& v : out.pixels) {
    v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
  }
  return out;
}

BlurKernel gaussian_kernel(std::size_t size, double sigma_x, double sigma_y,
                           double angle) {
  if (size < 3 || size % 2 == 0) {
    throw ContractViolation("gaussian_kernel: size must be odd and >= 3, got " +
                            std::to_string(size));
  }
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) {
    throw ContractViolation("gaussian_kernel: sigmas must be positive");
  }
  BlurKernel k;
  k.size = size;
  k.sigma_x = sigma_x;
  k.sigma_y = sigma_y;
  k.angle = angle;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const auto half = static_cast<long>(size / 2);
  std::vector<double> w(size * size);
  double total = 0.0;
  for (long dy = -half; dy <= half; ++dy) {
    for (long dx = -half; dx <= half; ++dx) {
      const double u = c * dx + s * dy;
      const double v = -s * dx + c * dy;
      const double val = std::exp(-0.5 * (u * u / (sigma_x * sigma_x) +
                                          v * v / (sigma_y * sigma_y)));
      w[(dy + half) * size + (dx + half)] = val;
      total += val;
    }
  }
  k.weights.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    k.weights[i] = static_cast<float>(w[i] / total);
  }
  return k;
}

BlurKernel kernel_from_weights(std::size_t size, std::vector<float> weights) {
  if (size % 2 == 0 || weights.size() != size * size) {
    throw ContractViolation("kernel_from_weights: need odd size and size^2 "
                            "weights");
  }
  double total = 0.0;
  for (float v : weights) {
    if (v < 0.0f) throw ContractViolation("kernel_from_weights: negative tap");
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-5) {
    throw ContractViolation("kernel_from_weights: taps sum to " +
                            std::to_string(total));
  }
  BlurKernel k;
  k.size = size;
  k.weights = std::move(weights);
  return k;
}

BlurKernel random_blur_kernel(Rng& rng) {
  static constexpr std::size_t kSizes[] = {7, 9, 11, 13};
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> sigma(0.6, 3.0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  const std::size_t size = kSizes[pick(rng)];
  const double sx = sigma(rng);
  const double sy = sigma(rng);
  return gaussian_kernel(size, sx, sy, angle(rng));
}

ImageBuffer blur(const ImageBuffer& img, const BlurKernel& kernel) {
  ImageBuffer out(img.height, img.width, img.channels);
  const auto half = static_cast<std::ptrdiff_t>(kernel.size / 2);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  std::vector<double> acc(img.channels);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::ptrdiff_t ky = -half; ky <= half; ++ky) {
        const auto sy = static_cast<std::size_t>(reflect_index(y - ky, h));
        for (std::ptrdiff_t kx = -half; kx <= half; ++kx) {
          const auto sx = static_cast<std::size_t>(reflect_index(x - kx, w));
          const double wt = kernel.at(static_cast<std::size_t>(ky + half),
                                      static_cast<std::size_t>(kx + half));
          for (std::size_t c = 0; c < img.channels; ++c) {
            acc[c] += wt * img.at(sy, sx, c);
          }
        }
      }
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
            static_cast<float>(std::clamp(acc[c], 0.0, 1.0));
      }
    }
  }
  return out;
}

ImageBuffer synthetic_image(std::size_t height, std::size_t width,
                            std::size_t channels, std::uint64_t seed) {
  if (channels != 1 && channels != 3) {
    throw ContractViolation("synthetic_image: channels must be 1 or 3");
  }
  Rng rng = derive_rng(seed, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  ImageBuffer img(height, width, channels);

  std::vector<double> base(channels), gy(channels), gx(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    base[c] = 0.25 + 0.5 * u(rng);
    gy[c] = 0.3 * (u(rng) - 0.5);
    gx[c] = 0.3 * (u(rng) - 0.5);
  }
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        img.at(y, x, c) = static_cast<float>(base[c] + gy[c] * (y / h - 0.5) +
                                             gx[c] * (x / w - 0.5));

  const int shapes = 3 + static_cast<int>(u(rng) * 4);
  for (int s = 0; s < shapes; ++s) {
    const bool disk = u(rng) < 0.5;
    const double cy = u(rng) * h;
    const double cx = u(rng) * w;
    const double ry = (0.08 + 0.2 * u(rng)) * h;
    const double rx = (0.08 + 0.2 * u(rng)) * w;
    std::vector<double> colour(channels);
    for (double& v : colour) v = u(rng);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dy = (y - cy) / ry;
        const double dx = (x - cx) / rx;
        const bool inside = disk ? dy * dy + dx * dx <= 1.0
                                 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        for (std::size_t c = 0; c < channels; ++c) {
          img.at(y, x, c) = static_cast<float>(colour[c]);
        }
      }
    }
  }

  const double theta = u(rng) * std::numbers::pi;
  const double period = 3.0 + 5.0 * u(rng);
  const double amp = 0.08 + 0.08 * u(rng);
  const double y0 = u(rng) * h * 0.5;
  const double y1 = y0 + h * 0.35;
  for (std::size_t y = 0; y < height; ++y) {
    if (y < y0 || y > y1) continue;
    for (std::size_t x = 0; x < width; ++x) {
      const double t = (std::cos(theta) * x + std::sin(theta) * y) * 2.0 * std::numbers::pi / period;
      for (std::size_t c = 0; c < channels; ++c) {
        img.at(y, x, c) += static_cast<float>(amp * std::sin(t));
      }
    }
  }
  clip_unit(img);
  return img;
}

}  // namespace hfe
