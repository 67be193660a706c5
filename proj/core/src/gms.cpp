#include "hfe/gms.hpp"

#include <algorithm>
#include <cmath>

#include "hfe/degrade.hpp"
#include "hfe/error.hpp"

namespace hfe {

namespace {

using Index = std::ptrdiff_t;

void require_same(const Plane& a, const Plane& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ContractViolation(std::string(op) + ": shape mismatch " +
                            std::to_string(a.height) + "x" +
                            std::to_string(a.width) + " vs " +
                            std::to_string(b.height) + "x" +
                            std::to_string(b.width));
  }
}

}  // namespace

StructuringElement StructuringElement::square(std::size_t size) {
  return from_footprint(Grid<std::uint8_t>(size, size, 1));
}

StructuringElement StructuringElement::from_footprint(
    Grid<std::uint8_t> footprint) {
  if (footprint.height != footprint.width || footprint.height % 2 == 0) {
    throw ContractViolation("structuring element must be odd and square");
  }
  const std::size_t c = footprint.height / 2;
  if (!footprint.at(c, c)) {
    throw ContractViolation("structuring element centre must be set");
  }
  StructuringElement se;
  se.footprint = std::move(footprint);
  return se;
}

StructuringElement StructuringElement::reflected() const {
  const std::size_t k = footprint.height;
  Grid<std::uint8_t> r(k, k);
  for (std::size_t y = 0; y < k; ++y)
    for (std::size_t x = 0; x < k; ++x)
      r.at(k - 1 - y, k - 1 - x) = footprint.at(y, x);
  return from_footprint(std::move(r));
}

std::vector<std::pair<Index, Index>> StructuringElement::offsets() const {
  const auto half = static_cast<Index>(footprint.height / 2);
  std::vector<std::pair<Index, Index>> out;
  for (std::size_t y = 0; y < footprint.height; ++y)
    for (std::size_t x = 0; x < footprint.width; ++x)
      if (footprint.at(y, x)) {
        out.emplace_back(static_cast<Index>(y) - half,
                         static_cast<Index>(x) - half);
      }
  return out;
}

Plane gradient_magnitude(const Plane& gray) {
  const auto h = static_cast<Index>(gray.height);
  const auto w = static_cast<Index>(gray.width);
  Plane out(gray.height, gray.width);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      auto px = [&](Index dy, Index dx) -> double {
        return gray.at(static_cast<std::size_t>(reflect_index(y + dy, h)),
                       static_cast<std::size_t>(reflect_index(x + dx, w)));
      };
      double gx = 0.0;
      double gy = 0.0;
      for (Index d = -1; d <= 1; ++d) {
        gx += px(d, 1) - px(d, -1);
        gy += px(1, d) - px(-1, d);
      }
      gx /= 3.0;
      gy /= 3.0;
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
          static_cast<float>(std::sqrt(gx * gx + gy * gy));
    }
  }
  return out;
}

Plane gradient_magnitude(const ImageBuffer& img) {
  return gradient_magnitude(to_luma(img));
}

GmsMap gms_map(const Plane& hr_gray, const Plane& sr_gray, double c,
               double peak) {
  require_same(hr_gray, sr_gray, "gms_map");
  if (!(c > 0.0)) throw ContractViolation("gms_map: c must be positive");
  const double scaled_c = c * (peak / 255.0) * (peak / 255.0);
  const Plane ga = gradient_magnitude(hr_gray);
  const Plane gb = gradient_magnitude(sr_gray);
  GmsMap out(hr_gray.height, hr_gray.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = ga.values[i];
    const double b = gb.values[i];
    const double sim = (2.0 * a * b + scaled_c) / (a * a + b * b + scaled_c);
    out.values[i] = static_cast<float>(std::clamp(1.0 - sim, 0.0, 1.0));
  }
  return out;
}

GmsMap gms_map(const ImageBuffer& hr, const ImageBuffer& sr, double c) {
  if (!hr.same_shape(sr)) {
    throw ContractViolation("gms_map: images differ in shape");
  }
  return gms_map(to_luma(hr), to_luma(sr), c, 1.0);
}

BinaryMask binarize(const Plane& map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractViolation("binarize: threshold must lie in (0, 1)");
  }
  BinaryMask out(map.height, map.width);
  for (std::size_t i = 0; i < map.size(); ++i) {
    out.values[i] = map.values[i] >= threshold ? 1 : 0;
  }
  return out;
}

BinaryMask erode(const BinaryMask& a, const StructuringElement& b) {
  const auto h = static_cast<Index>(a.height);
  const auto w = static_cast<Index>(a.width);
  const auto offsets = b.offsets();
  BinaryMask out(a.height, a.width);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      bool keep = true;
      for (const auto& [dy, dx] : offsets) {
        const Index sy = y + dy;
        const Index sx = x + dx;
        if (sy < 0 || sy >= h || sx < 0 || sx >= w ||
            !a.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx))) {
          keep = false;
          break;
        }
      }
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = keep;
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& a, const StructuringElement& b) {
  const auto h = static_cast<Index>(a.height);
  const auto w = static_cast<Index>(a.width);
  const auto offsets = b.offsets();
  BinaryMask out(a.height, a.width);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      bool hit = false;
      for (const auto& [dy, dx] : offsets) {
        const Index sy = y - dy;
        const Index sx = x - dx;
        if (sy >= 0 && sy < h && sx >= 0 && sx < w &&
            a.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx))) {
          hit = true;
          break;
        }
      }
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = hit;
    }
  }
  return out;
}

BinaryMask open(const BinaryMask& a, const StructuringElement& b) {
  return dilate(erode(a, b), b);
}

BinaryMask complement(const BinaryMask& a) {
  BinaryMask out = a;
  for (auto& v : out.values) v = v ? 0 : 1;
  return out;
}

Plane gaussian_blur(const Plane& plane, double sigma) {
  if (!(sigma > 0.0)) throw ContractViolation("gaussian_blur: sigma must be > 0");
  // The isotropic kernel factors into two normalised 1-D passes.
  const auto radius = static_cast<Index>(std::max(1.0, std::ceil(3.0 * sigma)));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (Index k = -radius; k <= radius; ++k) {
    total += taps[static_cast<std::size_t>(k + radius)] =
        std::exp(-double(k * k) / (2.0 * sigma * sigma));
  }
  for (double& t : taps) t /= total;

  const auto h = static_cast<Index>(plane.height);
  const auto w = static_cast<Index>(plane.width);
  std::vector<double> rows(plane.size());
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Index k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] *
               plane.values[static_cast<std::size_t>(y * w + reflect_index(x - k, w))];
      }
      rows[static_cast<std::size_t>(y * w + x)] = acc;
    }
  Plane out(plane.height, plane.width);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Index k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] *
               rows[static_cast<std::size_t>(reflect_index(y - k, h) * w + x)];
      }
      out.values[static_cast<std::size_t>(y * w + x)] =
          static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  return out;
}

SoftMask soften(const BinaryMask& hard, double sigma, std::size_t iterations,
                const StructuringElement& element) {
  if (iterations < 1) throw ContractViolation("soften: iterations must be >= 1");
  Plane current = mask_to_plane(hard);
  for (std::size_t it = 0; it < iterations; ++it) {
    current = gaussian_blur(current, sigma);
    for (float& v : current.values) v = std::clamp(v, 0.0f, 1.0f);
    const BinaryMask level = binarize(current, 0.5);
    const BinaryMask kept = open(level, element);
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (level.values[i] && !kept.values[i]) current.values[i] *= 0.5f;
    }
  }
  SoftMask out(current.height, current.width);
  out.values = std::move(current.values);
  return out;
}

GmsMaskStages gms_mask_stages(const ImageBuffer& hr, const ImageBuffer& sr,
                              const GmsMaskConfig& cfg) {
  const StructuringElement se = StructuringElement::square(cfg.element_size);
  GmsMaskStages st;
  st.gms = gms_map(hr, sr, cfg.c);
  st.binary = binarize(st.gms, cfg.threshold);
  st.hard = open(st.binary, se);
  st.soft = soften(st.hard, cfg.sigma, cfg.iterations, se);
  return st;
}

SoftMask make_soft_gms_mask(const ImageBuffer& hr, const ImageBuffer& sr,
                            const GmsMaskConfig& cfg) {
  return gms_mask_stages(hr, sr, cfg).soft;
}

ImageBuffer apply_mask(const ImageBuffer& img, const Plane& mask) {
  if (img.height != mask.height || img.width != mask.width) {
    throw ContractViolation("apply_mask: mask does not match image");
  }
  ImageBuffer out = img;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    for (std::size_t c = 0; c < img.channels; ++c) {
      out.pixels[i * img.channels + c] *= mask.values[i];
    }
  }
  return out;
}

Plane mask_to_plane(const BinaryMask& mask) {
  Plane out(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.values[i] = mask.values[i] ? 1.0f : 0.0f;
  }
  return out;
}

}  // namespace hfe
