#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "v2ir/common.hpp"
#include "v2ir/image.hpp"

namespace v2ir {

// Edge-preserving selective Gaussian blur. Each output pixel is the
// Gaussian-weighted mean (sigma = radius/2, window (2r+1)^2, clamp-to-edge)
// over the neighbors whose value differs from the center by at most
// max_delta; the center always participates. Results are rounded
// half-away-from-zero. radius 0 is a pass-through.
inline Image selective_gaussian_blur(const Image& img, int radius, int max_delta) {
  require(radius >= 0, "selective_gaussian_blur: radius must be >= 0");
  require(max_delta >= 0 && max_delta <= 255,
          "selective_gaussian_blur: max_delta must be in [0,255]");
  if (radius == 0) return img;

  const double sigma = radius / 2.0;
  const int span = 2 * radius + 1;
  std::vector<double> weight(static_cast<std::size_t>(span) * span);
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      weight[static_cast<std::size_t>(dy + radius) * span + (dx + radius)] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));

  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const int center = img.at(x, y, c);
        double acc = 0.0, wsum = 0.0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int qy = std::clamp(y + dy, 0, img.height - 1);
          for (int dx = -radius; dx <= radius; ++dx) {
            const int qx = std::clamp(x + dx, 0, img.width - 1);
            const int v = img.at(qx, qy, c);
            if (std::abs(v - center) > max_delta) continue;
            const double w =
                weight[static_cast<std::size_t>(dy + radius) * span + (dx + radius)];
            acc += w * v;
            wsum += w;
          }
        }
        const long r = std::llround(acc / wsum);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace v2ir
