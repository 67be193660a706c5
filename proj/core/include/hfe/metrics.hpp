#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hfe/image.hpp"

namespace hfe {

inline constexpr double kPsnrCap = 100.0;

enum class PsnrMode { kRgb, kLuma };

// 10 log10(1 / MSE) for [0, 1] images, capped at kPsnrCap.
double psnr(const ImageBuffer& a, const ImageBuffer& b,
            PsnrMode mode = PsnrMode::kRgb);
double psnr_from_mse(double mse);

// Mean SSIM over 'valid' 11x11 Gaussian windows (sigma 1.5) on luma,
// K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct MetricRow {
  std::string path;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  void add(std::string path, double psnr_db, double ssim_value);
  double mean_psnr() const;
  double mean_ssim() const;
  // `path,psnr,ssim` rows followed by a `mean` row.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

}  // namespace hfe
