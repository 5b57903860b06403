#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "v2ir/blur.hpp"
#include "v2ir/common.hpp"
#include "v2ir/dataset.hpp"
#include "v2ir/image.hpp"
#include "v2ir/rng.hpp"

namespace v2ir {
namespace scene {

// ---------------------------------------------------------------------------
// Scene description
// ---------------------------------------------------------------------------

// Geometry in unit frame coordinates; temperature on the emission scale
// used by the thermal channel (0 = coldest, 1 = hottest object of interest).
struct Target {
  TargetClass cls = TargetClass::person;
  double cx = 0.5, cy = 0.5;  // center, unit coords
  double w = 0.1, h = 0.15;   // full extents, unit coords
  double heading = 0.0;       // radians
  double temperature = 0.8;
};

struct Condition {
  TimeOfDay time = TimeOfDay::day;
  Viewpoint viewpoint = Viewpoint::angled;
  int background_class = 0;
};

struct SceneSpec {
  Condition cond;
  std::vector<Target> targets;
};

struct RenderConfig {
  int width = 64;
  int height = 64;
  int texture_octaves = 2;
  double visible_noise_sigma = 2.0;
  double ir_noise_sigma = 2.0;
};

// --------------------------- value-noise terrain ---------------------------

namespace detail {

inline double hash01(std::uint64_t key, int xi, int yi) {
  const std::uint64_t cell = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(xi)) << 32) |
                             static_cast<std::uint32_t>(yi);
  return static_cast<double>(v2ir::detail::mix64(key ^ cell) >> 11) * 0x1.0p-53;
}

inline double value_noise(std::uint64_t key, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const double tx = x - fx, ty = y - fy;
  const double sx = tx * tx * (3.0 - 2.0 * tx);
  const double sy = ty * ty * (3.0 - 2.0 * ty);
  const double v00 = hash01(key, x0, y0), v10 = hash01(key, x0 + 1, y0);
  const double v01 = hash01(key, x0, y0 + 1), v11 = hash01(key, x0 + 1, y0 + 1);
  const double a = v00 + (v10 - v00) * sx;
  const double b = v01 + (v11 - v01) * sx;
  return a + (b - a) * sy;
}

// Octave-summed value noise in [0,1]; base cell ~16 px so low frequencies
// dominate desk-scale frames.
inline double fbm(std::uint64_t key, double px, double py, int octaves) {
  double sum = 0.0, norm = 0.0, amp = 1.0, freq = 1.0 / 16.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(v2ir::detail::mix64(key + static_cast<std::uint64_t>(o) + 1),
                             px * freq, py * freq);
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return sum / norm;
}

inline std::uint64_t background_key(int background_class) {
  return v2ir::detail::mix64(0x746572726169006eull + static_cast<std::uint64_t>(background_class));
}

// Terrain palette endpoints derived from the class hash: dark and light
// stops per channel, kept apart so texture survives quantization.
inline void background_palette(int background_class, double lo[3], double hi[3]) {
  const std::uint64_t h = v2ir::detail::mix64(background_key(background_class));
  for (int c = 0; c < 3; ++c) {
    lo[c] = 40.0 + static_cast<double>((h >> (c * 7)) & 63);
    hi[c] = 130.0 + static_cast<double>((h >> (21 + c * 7)) & 63);
  }
}

// ------------------------------ footprints ---------------------------------

struct Footprint {
  double cx, cy;      // pixel coords
  double rx, ry;      // half extents in pixels
  double ch, sh;      // cos/sin heading
  bool ellipse;       // person = ellipse, vehicle = rotated rectangle

  bool contains(int px, int py) const {
    // The pixel holding the center always belongs to the footprint, so even
    // sub-pixel targets rasterize to at least one pixel.
    if (px == static_cast<int>(std::floor(cx)) && py == static_cast<int>(std::floor(cy)))
      return true;
    const double dx = (px + 0.5) - cx;
    const double dy = (py + 0.5) - cy;
    const double u = dx * ch + dy * sh;
    const double v = -dx * sh + dy * ch;
    if (ellipse) {
      const double a = u / rx, b = v / ry;
      return a * a + b * b <= 1.0;
    }
    return std::abs(u) <= rx && std::abs(v) <= ry;
  }
};

inline Footprint make_footprint(const Target& t, const RenderConfig& cfg) {
  Footprint f;
  f.cx = t.cx * cfg.width;
  f.cy = t.cy * cfg.height;
  f.rx = std::max(0.5, t.w * cfg.width / 2.0);
  f.ry = std::max(0.5, t.h * cfg.height / 2.0);
  f.ch = std::cos(t.heading);
  f.sh = std::sin(t.heading);
  f.ellipse = (t.cls == TargetClass::person);
  return f;
}

// Conservative pixel scan window for a footprint, clipped to the frame.
struct ScanBox {
  int x0, y0, x1, y1;  // inclusive; empty when x0 > x1
};

inline ScanBox scan_window(const Footprint& f, const RenderConfig& cfg) {
  const double ex = f.rx * std::abs(f.ch) + f.ry * std::abs(f.sh);
  const double ey = f.rx * std::abs(f.sh) + f.ry * std::abs(f.ch);
  ScanBox b;
  b.x0 = std::max(0, static_cast<int>(std::floor(f.cx - ex - 1.0)));
  b.y0 = std::max(0, static_cast<int>(std::floor(f.cy - ey - 1.0)));
  b.x1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(f.cx + ex + 1.0)));
  b.y1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(f.cy + ey + 1.0)));
  return b;
}

}  // namespace detail

// ------------------------------- sampling ----------------------------------

inline double viewpoint_scale(Viewpoint v) {
  switch (v) {
    case Viewpoint::overhead: return 0.9;
    case Viewpoint::angled: return 1.0;
    case Viewpoint::close: return 1.6;
    case Viewpoint::far: return 0.55;
  }
  return 1.0;
}

// Draws 1..4 targets with class-dependent sizes scaled by the viewpoint.
// Pure function of (condition, rng identity): only child streams are used.
inline SceneSpec sample_scene(const Condition& cond, const Rng& rng) {
  SceneSpec scene;
  scene.cond = cond;
  Rng count_rng = rng.child("count");
  const int n = 1 + static_cast<int>(count_rng.below(4));
  const double scale = viewpoint_scale(cond.viewpoint);
  for (int i = 0; i < n; ++i) {
    Rng tr = rng.child("target", i);
    Target t;
    t.cls = tr.below(2) == 0 ? TargetClass::person : TargetClass::vehicle;
    t.cx = tr.uniform(0.15, 0.85);
    t.cy = tr.uniform(0.15, 0.85);
    if (t.cls == TargetClass::person) {
      t.w = scale * tr.uniform(0.08, 0.14);
      t.h = scale * tr.uniform(0.12, 0.22);
      t.temperature = tr.uniform(0.7, 0.9);
    } else {
      t.w = scale * tr.uniform(0.16, 0.30);
      t.h = scale * tr.uniform(0.09, 0.16);
      t.temperature = tr.uniform(0.8, 1.0);
    }
    t.heading = tr.uniform(0.0, 2.0 * 3.14159265358979323846);
    scene.targets.push_back(t);
  }
  return scene;
}

// ------------------------------ annotations ---------------------------------

// Tight axis-aligned pixel bounds of each target's rasterized footprint
// (occlusion ignored), clipped to the frame. A target whose footprint
// rasterizes to nothing violates the scene contract.
inline std::vector<Annotation> annotations(const SceneSpec& scene, const RenderConfig& cfg) {
  std::vector<Annotation> out;
  for (const Target& t : scene.targets) {
    const detail::Footprint f = detail::make_footprint(t, cfg);
    const detail::ScanBox w = detail::scan_window(f, cfg);
    int x0 = cfg.width, y0 = cfg.height, x1 = -1, y1 = -1;
    for (int py = w.y0; py <= w.y1; ++py)
      for (int px = w.x0; px <= w.x1; ++px)
        if (f.contains(px, py)) {
          x0 = std::min(x0, px);
          y0 = std::min(y0, py);
          x1 = std::max(x1, px);
          y1 = std::max(y1, py);
        }
    require(x1 >= 0, "annotations: target footprint does not intersect the frame");
    out.push_back(Annotation{t.cls, x0, y0, x1, y1});
  }
  return out;
}

// ------------------------------- rendering ---------------------------------

namespace detail {

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::llround(v), 0LL, 255LL));
}

// Per-target tint so repeated classes stay visually distinct.
inline double target_mod(int index) {
  const std::uint64_t h = v2ir::detail::mix64(static_cast<std::uint64_t>(index) + 0x517cc1b727220a95ull);
  return 0.75 + 0.5 * (static_cast<double>(h >> 11) * 0x1.0p-53);
}

}  // namespace detail

// Visible channel: textured terrain, painted targets (later targets on top),
// sensor noise; night scenes lose most luminance and gain heavier noise.
// Draws only from child streams of `rng`, so two scenes rendered under the
// same rng identity see identical noise fields.
inline Image render_visible(const SceneSpec& scene, const RenderConfig& cfg, const Rng& rng) {
  require(cfg.width > 0 && cfg.height > 0, "render: extents must be positive");
  double lo[3], hi[3];
  detail::background_palette(scene.cond.background_class, lo, hi);
  const std::uint64_t key = detail::background_key(scene.cond.background_class);
  std::vector<double> buf(static_cast<std::size_t>(cfg.width) * cfg.height * 3);
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      const double t = detail::fbm(key, x + 0.5, y + 0.5, cfg.texture_octaves);
      double* px = &buf[(static_cast<std::size_t>(y) * cfg.width + x) * 3];
      for (int c = 0; c < 3; ++c) px[c] = lo[c] + t * (hi[c] - lo[c]);
    }
  for (std::size_t i = 0; i < scene.targets.size(); ++i) {
    const Target& t = scene.targets[i];
    const detail::Footprint f = detail::make_footprint(t, cfg);
    const detail::ScanBox w = detail::scan_window(f, cfg);
    const double mod = detail::target_mod(static_cast<int>(i));
    const double base[3] = {t.cls == TargetClass::person ? 175.0 : 90.0,
                            t.cls == TargetClass::person ? 85.0 : 105.0,
                            t.cls == TargetClass::person ? 70.0 : 120.0};
    for (int py = w.y0; py <= w.y1; ++py)
      for (int px = w.x0; px <= w.x1; ++px)
        if (f.contains(px, py)) {
          double* p = &buf[(static_cast<std::size_t>(py) * cfg.width + px) * 3];
          for (int c = 0; c < 3; ++c) p[c] = base[c] * mod;
        }
  }
  Rng noise = rng.child("visible-noise");
  const bool night = scene.cond.time == TimeOfDay::night;
  Rng night_noise = rng.child("night-noise");
  Image img(cfg.width, cfg.height, 3);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    double v = buf[i] + noise.normal(0.0, cfg.visible_noise_sigma);
    if (night) v = v * 0.25 + night_noise.normal(0.0, 4.0);
    img.pixels[i] = detail::quantize(v);
  }
  return img;
}

// Thermal channel: emission from per-pixel temperature (covering target's
// temperature, later targets on top; otherwise the background temperature)
// blended with ambient, plus sensor noise. No visible-texture leakage.
inline Image render_ir(const SceneSpec& scene, const RenderConfig& cfg, const Rng& rng) {
  require(cfg.width > 0 && cfg.height > 0, "render: extents must be positive");
  const bool night = scene.cond.time == TimeOfDay::night;
  const double ambient = night ? 0.1 : 0.4;
  const double bg_temp = night ? 0.05 : 0.2;
  std::vector<double> temp(static_cast<std::size_t>(cfg.width) * cfg.height, bg_temp);
  for (const Target& t : scene.targets) {
    const detail::Footprint f = detail::make_footprint(t, cfg);
    const detail::ScanBox w = detail::scan_window(f, cfg);
    for (int py = w.y0; py <= w.y1; ++py)
      for (int px = w.x0; px <= w.x1; ++px)
        if (f.contains(px, py)) temp[static_cast<std::size_t>(py) * cfg.width + px] = t.temperature;
  }
  Rng noise = rng.child("ir-noise");
  Image img(cfg.width, cfg.height, 1);
  for (std::size_t i = 0; i < temp.size(); ++i) {
    const double v = 255.0 * (0.15 * ambient + 0.85 * temp[i]) + noise.normal(0.0, cfg.ir_noise_sigma);
    img.pixels[i] = detail::quantize(v);
  }
  return img;
}

// ------------------------------ generation ---------------------------------

struct ConditionWeight {
  Condition cond;
  double weight = 1.0;
};
using ConditionMix = std::vector<ConditionWeight>;

// Every combination of the given times/viewpoints with background classes
// [0, background_classes), uniform weights.
inline ConditionMix uniform_condition_mix(const std::vector<TimeOfDay>& times,
                                          const std::vector<Viewpoint>& viewpoints,
                                          int background_classes = 6) {
  require(!times.empty() && !viewpoints.empty() && background_classes >= 1,
          "condition mix: need at least one time, viewpoint, and background class");
  ConditionMix mix;
  for (TimeOfDay t : times)
    for (Viewpoint v : viewpoints)
      for (int b = 0; b < background_classes; ++b)
        mix.push_back({Condition{t, v, b}, 1.0});
  return mix;
}

namespace detail {

inline const Condition& pick_condition(const ConditionMix& mix, Rng& rng) {
  double total = 0.0;
  for (const ConditionWeight& cw : mix) {
    require(cw.weight >= 0.0 && std::isfinite(cw.weight), "condition mix: bad weight");
    total += cw.weight;
  }
  require(total > 0.0, "condition mix: weights sum to zero");
  double u = rng.uniform() * total;
  for (const ConditionWeight& cw : mix) {
    u -= cw.weight;
    if (u < 0.0) return cw.cond;
  }
  return mix.back().cond;
}

}  // namespace detail

// Paired visible/thermal samples under sampled conditions. The synthetic
// family applies the selective smoothing pass to both channels; the
// real-analog stand-in family instead renders finer texture (double
// octaves) with calmer per-pixel noise and keeps the raw detail.
inline Dataset generate_dataset(int n, const ConditionMix& mix, Family family, const Rng& rng,
                                RenderConfig cfg = RenderConfig{}, int blur_radius = 5,
                                int blur_max_delta = 50) {
  require(n >= 1, "generate_dataset: n must be >= 1");
  require(!mix.empty(), "generate_dataset: condition mix is empty");
  if (family == Family::real_analog) {
    cfg.texture_octaves *= 2;
    cfg.visible_noise_sigma = 1.0;
  }
  Dataset ds;
  ds.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng sr = rng.child("sample", i);
    Rng cond_rng = sr.child("cond");
    const Condition cond = detail::pick_condition(mix, cond_rng);
    const SceneSpec spec = sample_scene(cond, sr.child("scene"));
    Sample s;
    s.family = family;
    s.time = cond.time;
    s.viewpoint = cond.viewpoint;
    s.background_class = cond.background_class;
    s.visible = render_visible(spec, cfg, sr.child("vis"));
    s.ir = render_ir(spec, cfg, sr.child("ir"));
    if (family == Family::synthetic) {
      s.visible = selective_gaussian_blur(s.visible, blur_radius, blur_max_delta);
      s.ir = selective_gaussian_blur(s.ir, blur_radius, blur_max_delta);
    }
    s.boxes = annotations(spec, cfg);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace scene
}  // namespace v2ir
