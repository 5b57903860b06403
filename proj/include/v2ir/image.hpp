#pragma once

#include <cstdint>
#include <vector>

#include "v2ir/common.hpp"

namespace v2ir {

// 8-bit raster, row-major, channel-interleaved. channels is 1 (grayscale)
// or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;

  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c) {
    require(w > 0 && h > 0, "image extents must be positive");
    require(c == 1 || c == 3, "image channels must be 1 or 3");
    pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
  }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::uint8_t& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }

  bool same_extents(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

inline bool operator==(const Image& a, const Image& b) {
  return a.width == b.width && a.height == b.height && a.channels == b.channels &&
         a.pixels == b.pixels;
}

inline double mean_pixel(const Image& img) {
  double acc = 0.0;
  for (std::uint8_t v : img.pixels) acc += v;
  return img.pixels.empty() ? 0.0 : acc / static_cast<double>(img.pixels.size());
}

}  // namespace v2ir
