#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "hfe/grid.hpp"
#include "hfe/tensor.hpp"

namespace hfe {

// H x W x C image with channel-interleaved floats in [0, 1]. C is 1 or 3.
struct ImageBuffer {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> pixels;

  ImageBuffer() = default;
  ImageBuffer(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool same_shape(const ImageBuffer& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const ImageBuffer&) const = default;
};

void clip_unit(ImageBuffer& img);

// 8- or 16-bit gray/RGB PNG (palette and alpha are expanded / dropped).
ImageBuffer load_image(const std::filesystem::path& path);
// 8-bit PNG with round-half-up quantisation of the clipped values.
void save_image(const ImageBuffer& img, const std::filesystem::path& path);
void save_image_16(const ImageBuffer& img, const std::filesystem::path& path);
void save_plane(const Plane& plane, const std::filesystem::path& path);

// ITU-R BT.601 luma for RGB, identity for gray.
Plane to_luma(const ImageBuffer& img);
ImageBuffer to_rgb(const ImageBuffer& img);

// Stacks images of one shape into an (N, C, H, W) tensor.
Tensor images_to_tensor(const std::vector<ImageBuffer>& images);
Tensor image_to_tensor(const ImageBuffer& img);
// Extracts batch item n, clipping to [0, 1].
ImageBuffer tensor_to_image(const Tensor& t, std::size_t n = 0);

// Dihedral transform: element in [0, 8); bit 2 flips horizontally first,
// the low two bits give the number of 90-degree counter-clockwise turns.
ImageBuffer dihedral(const ImageBuffer& img, unsigned element);
ImageBuffer crop(const ImageBuffer& img, std::size_t y, std::size_t x,
                 std::size_t h, std::size_t w);
// Reflect-pads bottom/right so both extents become multiples of `multiple`.
ImageBuffer pad_to_multiple(const ImageBuffer& img, std::size_t multiple);

}  // namespace hfe
