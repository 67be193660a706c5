#include "hfe/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "hfe/error.hpp"

namespace hfe {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    throw IoError(path.string(), std::string("cannot open for ") +
                                     (mode[0] == 'r' ? "reading" : "writing"));
  }
  return f;
}

std::uint8_t quantize8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::floor(c * 255.0f + 0.5f));
}

std::uint16_t quantize16(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint16_t>(std::floor(c * 65535.0 + 0.5));
}

void write_png(const std::filesystem::path& path, std::size_t height,
               std::size_t width, std::size_t channels, int bit_depth,
               const std::vector<std::uint8_t>& bytes) {
  FilePtr file = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError(path.string(), "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError(path.string(), "png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(height);
  const std::size_t stride = width * channels * (bit_depth / 8);
  for (std::size_t y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + y * stride);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string(), "PNG encode failed");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void check_writable(const ImageBuffer& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw ContractViolation("save_image " + path.string() + ": " +
                            std::to_string(img.channels) +
                            " channels (expected 1 or 3)");
  }
  if (img.pixels.size() != img.height * img.width * img.channels ||
      img.pixels.empty()) {
    throw ContractViolation("save_image " + path.string() +
                            ": inconsistent or empty buffer");
  }
}

}  // namespace

void clip_unit(ImageBuffer& img) {
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

ImageBuffer load_image(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string(), "not a PNG file");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError(path.string(), "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError(path.string(), "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string(), "PNG decode failed");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_png(png, info,
               PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA, nullptr);
  const std::size_t width = png_get_image_width(png, info);
  const std::size_t height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  const std::size_t channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);

  const bool gray = (color & PNG_COLOR_MASK_COLOR) == 0;
  if ((gray && channels != 1) || (!gray && channels != 3) ||
      (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string(), "unsupported PNG layout");
  }
  ImageBuffer img(height, width, channels);
  for (std::size_t y = 0; y < height; ++y) {
    const png_bytep row = rows[y];
    for (std::size_t i = 0; i < width * channels; ++i) {
      float v;
      if (depth == 16) {
        const unsigned hi = row[2 * i];
        const unsigned lo = row[2 * i + 1];
        v = static_cast<float>((hi << 8 | lo) / 65535.0);
      } else {
        v = static_cast<float>(row[i] / 255.0);
      }
      img.pixels[y * width * channels + i] = v;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
  check_writable(img, path);
  std::vector<std::uint8_t> bytes(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bytes.begin(), quantize8);
  write_png(path, img.height, img.width, img.channels, 8, bytes);
}

void save_image_16(const ImageBuffer& img, const std::filesystem::path& path) {
  check_writable(img, path);
  std::vector<std::uint8_t> bytes(img.pixels.size() * 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const std::uint16_t q = quantize16(img.pixels[i]);
    bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
  }
  write_png(path, img.height, img.width, img.channels, 16, bytes);
}

void save_plane(const Plane& plane, const std::filesystem::path& path) {
  ImageBuffer img(plane.height, plane.width, 1);
  img.pixels = plane.values;
  save_image(img, path);
}

Plane to_luma(const ImageBuffer& img) {
  Plane out(img.height, img.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (img.channels == 3) {
      const float* p = img.pixels.data() + 3 * i;
      out.values[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    } else {
      out.values[i] = img.pixels[i * img.channels];
    }
  }
  return out;
}

ImageBuffer to_rgb(const ImageBuffer& img) {
  if (img.channels == 3) return img;
  ImageBuffer out(img.height, img.width, 3);
  for (std::size_t i = 0; i < img.height * img.width; ++i) {
    const float v = img.pixels[i * img.channels];
    out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = v;
  }
  return out;
}

Tensor images_to_tensor(const std::vector<ImageBuffer>& images) {
  if (images.empty()) throw ContractViolation("images_to_tensor: no images");
  const ImageBuffer& first = images.front();
  const Shape s{images.size(), first.channels, first.height, first.width};
  std::vector<float> data(s.numel());
  for (std::size_t n = 0; n < images.size(); ++n) {
    const ImageBuffer& img = images[n];
    if (!img.same_shape(first)) {
      throw ContractViolation("images_to_tensor: batch images differ in shape");
    }
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.plane(); ++i)
        data[(n * s.c + c) * s.plane() + i] = img.pixels[i * s.c + c];
  }
  return Tensor::from_data(s, std::move(data));
}

Tensor image_to_tensor(const ImageBuffer& img) {
  return images_to_tensor({img});
}

ImageBuffer tensor_to_image(const Tensor& t, std::size_t n) {
  const Shape& s = t.shape();
  if (n >= s.n) throw ContractViolation("tensor_to_image: batch index");
  ImageBuffer img(s.h, s.w, s.c);
  const auto d = t.data();
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < s.plane(); ++i)
      img.pixels[i * s.c + c] =
          std::clamp(d[(n * s.c + c) * s.plane() + i], 0.0f, 1.0f);
  return img;
}

ImageBuffer dihedral(const ImageBuffer& img, unsigned element) {
  ImageBuffer cur = img;
  if (element & 4u) {
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        for (std::size_t c = 0; c < img.channels; ++c)
          cur.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  }
  for (unsigned turn = 0; turn < (element & 3u); ++turn) {
    ImageBuffer rot(cur.width, cur.height, cur.channels);
    for (std::size_t y = 0; y < rot.height; ++y)
      for (std::size_t x = 0; x < rot.width; ++x)
        for (std::size_t c = 0; c < cur.channels; ++c)
          rot.at(y, x, c) = cur.at(x, cur.width - 1 - y, c);
    cur = std::move(rot);
  }
  return cur;
}

ImageBuffer crop(const ImageBuffer& img, std::size_t y, std::size_t x,
                 std::size_t h, std::size_t w) {
  if (y + h > img.height || x + w > img.width) {
    throw ContractViolation("crop: window exceeds image bounds");
  }
  ImageBuffer out(h, w, img.channels);
  for (std::size_t r = 0; r < h; ++r) {
    std::copy_n(img.pixels.data() + ((y + r) * img.width + x) * img.channels,
                w * img.channels, out.pixels.data() + r * w * img.channels);
  }
  return out;
}

ImageBuffer pad_to_multiple(const ImageBuffer& img, std::size_t multiple) {
  const std::size_t h = (img.height + multiple - 1) / multiple * multiple;
  const std::size_t w = (img.width + multiple - 1) / multiple * multiple;
  if (h == img.height && w == img.width) return img;
  ImageBuffer out(h, w, img.channels);
  for (std::size_t y = 0; y < h; ++y) {
    const auto sy = static_cast<std::size_t>(reflect_index(
        static_cast<std::ptrdiff_t>(y), static_cast<std::ptrdiff_t>(img.height)));
    for (std::size_t x = 0; x < w; ++x) {
      const auto sx = static_cast<std::size_t>(reflect_index(
          static_cast<std::ptrdiff_t>(x), static_cast<std::ptrdiff_t>(img.width)));
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(sy, sx, c);
      }
    }
  }
  return out;
}

}  // namespace hfe
