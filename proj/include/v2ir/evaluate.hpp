#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include "v2ir/autograd.hpp"
#include "v2ir/common.hpp"
#include "v2ir/dataset.hpp"
#include "v2ir/models.hpp"
#include "v2ir/rng.hpp"

namespace v2ir {

struct EvalResult {
  double mean_l1_percent = 0.0;
  std::vector<double> per_sample;
};

// Runs one sample's visible channel through the generator; z (when the
// generator wants one) comes from the sample-indexed child stream, so the
// result is a pure function of (parameters, sample, z rng identity).
inline Image transform_sample(const Generator<float>& g, const Image& visible, const Rng& z_rng,
                              std::uint64_t sample_index = 0) {
  require_data(visible.channels == g.spec.in_channels,
               "transform: input must have " + std::to_string(g.spec.in_channels) + " channels");
  const auto x = leaf(std::make_shared<Tensor<float>>(normalize<float>(visible)), false);
  Value<float> z;
  if (g.spec.z_mode == ZMode::channel) {
    Rng zr = z_rng.child("z", sample_index);
    auto zt = make_tensor<float>(Shape{1, g.spec.z_channels, visible.height, visible.width});
    for (auto& v : zt->data) v = static_cast<float>(zr.normal());
    z = leaf(zt, false);
  }
  return denormalize(*generator_forward(g, x, z)->value);
}

// Mean absolute difference of two equal-size 8-bit rasters on the [0,1]
// scale, in percent.
inline double l1_percent_u8(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height && a.channels == b.channels,
          "l1_percent_u8: images must share extents");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    sum += std::abs(static_cast<int>(a.pixels[i]) - static_cast<int>(b.pixels[i]));
  return 100.0 * sum / (255.0 * static_cast<double>(a.pixels.size()));
}

// Generator L1 on a paired test set: translate each visible image, compare
// against its thermal ground truth at [0,1] scale, report mean + per-sample.
inline EvalResult evaluate(const Generator<float>& g, const Dataset& test, const Rng& z_rng) {
  require_data(!test.empty(), "evaluate: test set is empty");
  EvalResult out;
  for (std::size_t i = 0; i < test.samples.size(); ++i) {
    const Sample& s = test.samples[i];
    require_data(s.has_ir(), "evaluate: test sample " + std::to_string(i) + " is unpaired");
    const Image got = transform_sample(g, s.visible, z_rng, i);
    out.per_sample.push_back(l1_percent_u8(got, s.ir));
    out.mean_l1_percent += out.per_sample.back();
  }
  out.mean_l1_percent /= static_cast<double>(out.per_sample.size());
  return out;
}

}  // namespace v2ir
