#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "hfe/grid.hpp"
#include "hfe/image.hpp"

namespace hfe {

// Per-pixel gradient dissimilarity in [0, 1]; 0 where images agree.
struct GmsMap : Plane {
  using Plane::Plane;
};

// Per-pixel training weight in [0, 1].
struct SoftMask : Plane {
  using Plane::Plane;
};

// 1 = poorly reconstructed.
using BinaryMask = Grid<std::uint8_t>;

// Odd k x k footprint with its centre set; offsets are relative to the centre.
struct StructuringElement {
  Grid<std::uint8_t> footprint;

  static StructuringElement square(std::size_t size);
  static StructuringElement from_footprint(Grid<std::uint8_t> footprint);
  StructuringElement reflected() const;
  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> offsets() const;
};

// sqrt((I*Gx)^2 + (I*Gy)^2) with 1/3-scaled Prewitt kernels, reflective border.
Plane gradient_magnitude(const Plane& gray);
Plane gradient_magnitude(const ImageBuffer& img);

// 1 - (2 g_hr g_sr + c') / (g_hr^2 + g_sr^2 + c'), with c given on the 0-255
// scale and c' = c * (peak / 255)^2 for images whose white level is `peak`.
GmsMap gms_map(const Plane& hr_gray, const Plane& sr_gray, double c = 170.0,
               double peak = 1.0);
GmsMap gms_map(const ImageBuffer& hr, const ImageBuffer& sr, double c = 170.0);

// True where map >= threshold.
BinaryMask binarize(const Plane& map, double threshold);

// Pixels outside the image count as false for both operators.
BinaryMask erode(const BinaryMask& a, const StructuringElement& b);
BinaryMask dilate(const BinaryMask& a, const StructuringElement& b);
BinaryMask open(const BinaryMask& a, const StructuringElement& b);
BinaryMask complement(const BinaryMask& a);

// Isotropic Gaussian blur of a plane, reflective border.
Plane gaussian_blur(const Plane& plane, double sigma);

// Iterated blur + opening of the >= 0.5 level set; pixels the opening
// removes are damped by half instead of cleared.
SoftMask soften(const BinaryMask& hard, double sigma, std::size_t iterations,
                const StructuringElement& element = StructuringElement::square(3));

struct GmsMaskConfig {
  double c = 170.0;
  double threshold = 0.2;
  std::size_t element_size = 3;
  double sigma = 2.0;
  std::size_t iterations = 3;

  bool operator==(const GmsMaskConfig&) const = default;
};

struct GmsMaskStages {
  GmsMap gms;
  BinaryMask binary;
  BinaryMask hard;  // opened
  SoftMask soft;
};

GmsMaskStages gms_mask_stages(const ImageBuffer& hr, const ImageBuffer& sr,
                              const GmsMaskConfig& cfg = {});
SoftMask make_soft_gms_mask(const ImageBuffer& hr, const ImageBuffer& sr,
                            const GmsMaskConfig& cfg = {});

// Pixelwise product, mask broadcast over channels.
ImageBuffer apply_mask(const ImageBuffer& img, const Plane& mask);

Plane mask_to_plane(const BinaryMask& mask);

}  // namespace hfe
