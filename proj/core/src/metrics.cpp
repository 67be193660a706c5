#include "hfe/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hfe/error.hpp"

namespace hfe {

namespace {

void require_same(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ContractViolation(std::string(op) + ": images differ in shape (" +
                            std::to_string(a.height) + "x" +
                            std::to_string(a.width) + "x" +
                            std::to_string(a.channels) + " vs " +
                            std::to_string(b.height) + "x" +
                            std::to_string(b.width) + "x" +
                            std::to_string(b.channels) + ")");
  }
}

std::vector<double> gaussian_window() {
  constexpr int kSize = 11;
  constexpr double kSigma = 1.5;
  std::vector<double> g(kSize);
  double total = 0.0;
  for (int i = 0; i < kSize; ++i) {
    const double d = i - kSize / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double psnr_from_mse(double mse) {
  if (!(mse > 0.0)) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, PsnrMode mode) {
  require_same(a, b, "psnr");
  if (a.pixels.empty()) throw ContractViolation("psnr: empty image");
  double acc = 0.0;
  std::size_t count = 0;
  if (mode == PsnrMode::kLuma) {
    const Plane la = to_luma(a);
    const Plane lb = to_luma(b);
    for (std::size_t i = 0; i < la.size(); ++i) {
      const double d = static_cast<double>(la.values[i]) - lb.values[i];
      acc += d * d;
    }
    count = la.size();
  } else {
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
      const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
      acc += d * d;
    }
    count = a.pixels.size();
  }
  return psnr_from_mse(acc / static_cast<double>(count));
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  require_same(a, b, "ssim");
  constexpr std::size_t kWin = 11;
  if (a.height < kWin || a.width < kWin) {
    throw ContractViolation("ssim: images must be at least 11x11, got " +
                            std::to_string(a.height) + "x" +
                            std::to_string(a.width));
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const Plane la = to_luma(a);
  const Plane lb = to_luma(b);
  const std::vector<double> g = gaussian_window();
  const std::size_t oh = a.height - kWin + 1;
  const std::size_t ow = a.width - kWin + 1;
  double total = 0.0;
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < kWin; ++i) {
        for (std::size_t j = 0; j < kWin; ++j) {
          const double w = g[i] * g[j];
          const double va = la.at(y + i, x + j);
          const double vb = lb.at(y + i, x + j);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * (va * vb);  // order-free, so ssim(a, b) == ssim(b, a)
        }
      }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
  }
  return total / static_cast<double>(oh * ow);
}

void MetricReport::add(std::string path, double psnr_db, double ssim_value) {
  rows.push_back({std::move(path), psnr_db, ssim_value});
}

double MetricReport::mean_psnr() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.psnr;
  return s / static_cast<double>(rows.size());
}

double MetricReport::mean_ssim() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.ssim;
  return s / static_cast<double>(rows.size());
}

std::string MetricReport::to_csv() const {
  std::string out = "path,psnr,ssim\n";
  for (const auto& r : rows) {
    out += r.path + "," + format_number(r.psnr) + "," + format_number(r.ssim) + "\n";
  }
  out += "mean," + format_number(mean_psnr()) + "," + format_number(mean_ssim()) + "\n";
  return out;
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string(), "cannot open for writing");
  f << to_csv();
  if (!f) throw IoError(path.string(), "write failed");
}

}  // namespace hfe
