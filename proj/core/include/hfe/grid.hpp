#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hfe {

// Row-major H x W array.
template <typename T>
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, T fill = T{})
      : height(h), width(w), values(h * w, fill) {}

  T& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  const T& at(std::size_t y, std::size_t x) const {
    return values[y * width + x];
  }
  std::size_t size() const { return values.size(); }
  bool same_shape(const Grid& o) const {
    return height == o.height && width == o.width;
  }
  bool operator==(const Grid&) const = default;
};

using Plane = Grid<float>;

// Mirror an out-of-range index back into [0, n) without repeating the edge
// sample (…c b | a b c d | c b…). Periodic in 2(n-1) so any offset works.
inline std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace hfe
