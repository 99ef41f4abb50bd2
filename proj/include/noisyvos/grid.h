// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_GRID_H_
#define NOISYVOS_GRID_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "noisyvos/errors.h"

namespace noisyvos {

// Row-major H x W grid.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), values(CheckedArea(w, h), fill) {}
  Grid(int w, int h, std::vector<T> v) : width(w), height(h), values(std::move(v)) {
    if (values.size() != CheckedArea(w, h)) {
      throw ArgumentError("grid: value count does not match width x height");
    }
  }

  std::size_t size() const { return values.size(); }
  T& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  bool SameShape(int w, int h) const { return width == w && height == h; }
  template <typename U>
  bool SameShape(const Grid<U>& other) const {
    return width == other.width && height == other.height;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t CheckedArea(int w, int h) {
    if (w < 0 || h < 0) throw ArgumentError("grid: negative dimension");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
};

// Object ids per pixel; 0 is background.
using LabelMask = Grid<uint16_t>;
// Values in {0, 1}.
using BinaryMask = Grid<uint8_t>;
// Foreground probabilities in [0, 1].
using ProbabilityMap = Grid<double>;

// 8-bit interleaved RGB frame.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), rgb(3u * w * h, 0) {}
  uint8_t* pixel(int x, int y) { return &rgb[3u * (static_cast<std::size_t>(y) * width + x)]; }
  const uint8_t* pixel(int x, int y) const {
    return &rgb[3u * (static_cast<std::size_t>(y) * width + x)];
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline std::size_t CountOnes(const BinaryMask& mask) {
  std::size_t n = 0;
  for (uint8_t v : mask.values) n += v != 0;
  return n;
}

}  // namespace noisyvos

#endif  // NOISYVOS_GRID_H_
