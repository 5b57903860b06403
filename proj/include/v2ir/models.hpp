#pragma once

#include <string>
#include <vector>

#include "v2ir/autograd.hpp"
#include "v2ir/param_store.hpp"
#include "v2ir/rng.hpp"

namespace v2ir {

enum class GenKind { unet, resnet };
enum class ZMode { none, channel };

// U-Net: `depth` stride-2 encoder convs (k4,p1, widths base*2^l), mirrored
// stride-2 transposed-conv decoder; every encoder level below the bottleneck
// is concatenated onto the matching decoder input. ResNet: k7 stem, two
// stride-2 downsamples, `res_blocks` identity-skip blocks at 4*base width,
// two stride-2 upsamples, k7 head. Both end in tanh.
struct GeneratorSpec {
  GenKind kind = GenKind::unet;
  int in_channels = 3;
  int out_channels = 1;
  int base_width = 16;
  int depth = 4;       // unet down/up levels
  int res_blocks = 3;  // resnet residual blocks
  ZMode z_mode = ZMode::none;
  int z_channels = 1;

  int effective_in_channels() const {
    return in_channels + (z_mode == ZMode::channel ? z_channels : 0);
  }
  // Input spatial extents must be divisible by this.
  int divisor() const { return kind == GenKind::unet ? (1 << depth) : 4; }
};

// Patch discriminator: stride-2 convs at `widths`, one stride-1 conv at the
// last width, then a stride-1 single-channel head; all k4 p1, sigmoid output.
struct DiscriminatorSpec {
  bool conditional = false;
  int y_channels = 1;
  int x_channels = 3;  // used only when conditional
  std::vector<int> widths = {32, 64, 128};
};

template <class T>
struct Generator {
  GeneratorSpec spec;
  ParamStore<T> params;
};

template <class T>
struct Discriminator {
  DiscriminatorSpec spec;
  ParamStore<T> params;
};

namespace detail {

constexpr double kInitStd = 0.02;

template <class T>
void add_conv(ParamStore<T>& p, const std::string& name, int cin, int cout, int k, Rng& rng) {
  p.add(name + ".w", gaussian_init<T>({cout, cin, k, k}, 0.0, kInitStd, rng));
  p.add(name + ".b", gaussian_init<T>({cout}, 0.0, kInitStd, rng));
}

template <class T>
void add_convt(ParamStore<T>& p, const std::string& name, int cin, int cout, int k, Rng& rng) {
  p.add(name + ".w", gaussian_init<T>({cin, cout, k, k}, 0.0, kInitStd, rng));
  p.add(name + ".b", gaussian_init<T>({cout}, 0.0, kInitStd, rng));
}

template <class T>
void add_norm(ParamStore<T>& p, const std::string& name, int c, Rng& rng) {
  p.add(name + ".g", gaussian_init<T>({c}, 0.0, kInitStd, rng));
  p.add(name + ".bt", gaussian_init<T>({c}, 0.0, kInitStd, rng));
}

template <class T>
Value<T> conv_p(const ParamStore<T>& p, const std::string& name, const Value<T>& x, int stride,
                int pad) {
  return conv2d(x, leaf(p.get(name + ".w")), leaf(p.get(name + ".b")), stride, pad);
}

template <class T>
Value<T> convt_p(const ParamStore<T>& p, const std::string& name, const Value<T>& x, int stride,
                 int pad) {
  return conv_transpose2d(x, leaf(p.get(name + ".w")), leaf(p.get(name + ".b")), stride, pad);
}

template <class T>
Value<T> norm_p(const ParamStore<T>& p, const std::string& name, const Value<T>& x) {
  return instance_norm(x, leaf(p.get(name + ".g")), leaf(p.get(name + ".bt")), T(1e-5));
}

inline int unet_width(const GeneratorSpec& s, int level) {  // level 1..depth
  return s.base_width << (level - 1);
}

}  // namespace detail

// All weights (convolutions, biases, norm affine terms) are drawn from
// N(0, 0.02); parameter count and layout depend only on the spec.
template <class T>
Generator<T> build_generator(const GeneratorSpec& spec, Rng& rng) {
  require(spec.in_channels > 0 && spec.out_channels > 0 && spec.base_width > 0,
          "build_generator: channel/width fields must be positive");
  Generator<T> g{spec, {}};
  ParamStore<T>& p = g.params;
  const int cin = spec.effective_in_channels();

  if (spec.kind == GenKind::unet) {
    require(spec.depth >= 1, "build_generator: unet depth must be >= 1");
    detail::add_conv(p, "enc1", cin, detail::unet_width(spec, 1), 4, rng);
    for (int l = 2; l <= spec.depth; ++l) {
      detail::add_conv(p, "enc" + std::to_string(l), detail::unet_width(spec, l - 1),
                       detail::unet_width(spec, l), 4, rng);
      detail::add_norm(p, "enc" + std::to_string(l) + ".n", detail::unet_width(spec, l), rng);
    }
    for (int l = spec.depth; l >= 2; --l) {
      const int in_ch = l == spec.depth ? detail::unet_width(spec, l)
                                        : 2 * detail::unet_width(spec, l);
      detail::add_convt(p, "dec" + std::to_string(l), in_ch, detail::unet_width(spec, l - 1), 4,
                        rng);
      detail::add_norm(p, "dec" + std::to_string(l) + ".n", detail::unet_width(spec, l - 1), rng);
    }
    const int head_in = spec.depth == 1 ? detail::unet_width(spec, 1)
                                        : 2 * detail::unet_width(spec, 1);
    detail::add_convt(p, "out", head_in, spec.out_channels, 4, rng);
  } else {
    require(spec.res_blocks >= 1, "build_generator: res_blocks must be >= 1");
    const int b = spec.base_width;
    detail::add_conv(p, "stem", cin, b, 7, rng);
    detail::add_norm(p, "stem.n", b, rng);
    detail::add_conv(p, "down1", b, 2 * b, 3, rng);
    detail::add_norm(p, "down1.n", 2 * b, rng);
    detail::add_conv(p, "down2", 2 * b, 4 * b, 3, rng);
    detail::add_norm(p, "down2.n", 4 * b, rng);
    for (int i = 1; i <= spec.res_blocks; ++i) {
      const std::string r = "res" + std::to_string(i);
      detail::add_conv(p, r + ".c1", 4 * b, 4 * b, 3, rng);
      detail::add_norm(p, r + ".n1", 4 * b, rng);
      detail::add_conv(p, r + ".c2", 4 * b, 4 * b, 3, rng);
      detail::add_norm(p, r + ".n2", 4 * b, rng);
    }
    detail::add_convt(p, "up1", 4 * b, 2 * b, 4, rng);
    detail::add_norm(p, "up1.n", 2 * b, rng);
    detail::add_convt(p, "up2", 2 * b, b, 4, rng);
    detail::add_norm(p, "up2.n", b, rng);
    detail::add_conv(p, "head", b, spec.out_channels, 7, rng);
  }
  return g;
}

template <class T>
Discriminator<T> build_discriminator(const DiscriminatorSpec& spec, Rng& rng) {
  require(!spec.widths.empty(), "build_discriminator: widths must be non-empty");
  Discriminator<T> d{spec, {}};
  ParamStore<T>& p = d.params;
  int c = spec.y_channels + (spec.conditional ? spec.x_channels : 0);
  for (std::size_t i = 0; i < spec.widths.size(); ++i) {
    const std::string name = "d" + std::to_string(i + 1);
    detail::add_conv(p, name, c, spec.widths[i], 4, rng);
    if (i > 0) detail::add_norm(p, name + ".n", spec.widths[i], rng);
    c = spec.widths[i];
  }
  detail::add_conv(p, "ds", c, c, 4, rng);  // stride-1 layer
  detail::add_norm(p, "ds.n", c, rng);
  detail::add_conv(p, "head", c, 1, 4, rng);
  return d;
}

// x is NCHW with in_channels; z must be present iff z_mode == channel, with
// z_channels at x's spatial extents. Output matches x spatially, values in
// (-1, 1).
template <class T>
Value<T> generator_forward(const Generator<T>& g, const Value<T>& x, const Value<T>& z = {}) {
  const GeneratorSpec& s = g.spec;
  const Tensor<T>& xt = *x->value;
  require(xt.ndim() == 4 && xt.shape[1] == s.in_channels,
          "generator_forward: input must be NCHW with " + std::to_string(s.in_channels) +
              " channels");
  const int H = xt.shape[2], W = xt.shape[3];
  require(H % s.divisor() == 0 && W % s.divisor() == 0,
          "generator_forward: spatial extents must be divisible by " +
              std::to_string(s.divisor()));
  Value<T> in = x;
  if (s.z_mode == ZMode::channel) {
    require(static_cast<bool>(z), "generator_forward: z required when z_mode=channel");
    require(z->value->ndim() == 4 && z->value->shape[1] == s.z_channels &&
                z->value->shape[2] == H && z->value->shape[3] == W &&
                z->value->shape[0] == xt.shape[0],
            "generator_forward: z must be [N, z_channels, H, W]");
    in = concat_channels(x, z);
  } else {
    require(!z, "generator_forward: z must be absent when z_mode=none");
  }

  const ParamStore<T>& p = g.params;
  if (s.kind == GenKind::unet) {
    std::vector<Value<T>> enc;  // enc[l-1] = encoder level l output
    Value<T> h = leaky_relu(detail::conv_p(p, "enc1", in, 2, 1), T(0.2));
    enc.push_back(h);
    for (int l = 2; l <= s.depth; ++l) {
      h = detail::conv_p(p, "enc" + std::to_string(l), h, 2, 1);
      h = leaky_relu(detail::norm_p(p, "enc" + std::to_string(l) + ".n", h), T(0.2));
      enc.push_back(h);
    }
    for (int l = s.depth; l >= 2; --l) {
      h = detail::convt_p(p, "dec" + std::to_string(l), h, 2, 1);
      h = relu(detail::norm_p(p, "dec" + std::to_string(l) + ".n", h));
      h = concat_channels(h, enc[l - 2]);
    }
    return tanh_act(detail::convt_p(p, "out", h, 2, 1));
  }

  Value<T> h = relu(detail::norm_p(p, "stem.n", detail::conv_p(p, "stem", in, 1, 3)));
  h = relu(detail::norm_p(p, "down1.n", detail::conv_p(p, "down1", h, 2, 1)));
  h = relu(detail::norm_p(p, "down2.n", detail::conv_p(p, "down2", h, 2, 1)));
  for (int i = 1; i <= s.res_blocks; ++i) {
    const std::string r = "res" + std::to_string(i);
    Value<T> y = relu(detail::norm_p(p, r + ".n1", detail::conv_p(p, r + ".c1", h, 1, 1)));
    y = detail::norm_p(p, r + ".n2", detail::conv_p(p, r + ".c2", y, 1, 1));
    h = add(h, y);
  }
  h = relu(detail::norm_p(p, "up1.n", detail::convt_p(p, "up1", h, 2, 1)));
  h = relu(detail::norm_p(p, "up2.n", detail::convt_p(p, "up2", h, 2, 1)));
  return tanh_act(detail::conv_p(p, "head", h, 1, 3));
}

// y is the image being judged; x is the conditioning image, required iff the
// spec is conditional. Output is a patch probability map in (0, 1).
template <class T>
Value<T> discriminator_forward(const Discriminator<T>& d, const Value<T>& y,
                               const Value<T>& x = {}) {
  const DiscriminatorSpec& s = d.spec;
  require(y->value->ndim() == 4 && y->value->shape[1] == s.y_channels,
          "discriminator_forward: y must be NCHW with " + std::to_string(s.y_channels) +
              " channels");
  Value<T> in = y;
  if (s.conditional) {
    require(static_cast<bool>(x), "discriminator_forward: conditional discriminator needs x");
    require(x->value->ndim() == 4 && x->value->shape[1] == s.x_channels,
            "discriminator_forward: x must be NCHW with " + std::to_string(s.x_channels) +
                " channels");
    in = concat_channels(y, x);
  } else {
    require(!x, "discriminator_forward: unconditional discriminator takes no x");
  }

  const ParamStore<T>& p = d.params;
  Value<T> h = in;
  for (std::size_t i = 0; i < s.widths.size(); ++i) {
    const std::string name = "d" + std::to_string(i + 1);
    h = detail::conv_p(p, name, h, 2, 1);
    if (i > 0) h = detail::norm_p(p, name + ".n", h);
    h = leaky_relu(h, T(0.2));
  }
  h = leaky_relu(detail::norm_p(p, "ds.n", detail::conv_p(p, "ds", h, 1, 1)), T(0.2));
  return sigmoid_act(detail::conv_p(p, "head", h, 1, 1));
}

}  // namespace v2ir
