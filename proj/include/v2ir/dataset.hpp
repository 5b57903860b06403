#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "v2ir/common.hpp"
#include "v2ir/image.hpp"
#include "v2ir/image_io.hpp"
#include "v2ir/rng.hpp"
#include "v2ir/tensor.hpp"

namespace v2ir {

// ---------------------------------------------------------------------------
// Tags and annotations
// ---------------------------------------------------------------------------

enum class TimeOfDay { day, night };
enum class Viewpoint { overhead, angled, close, far };
enum class TargetClass { person, vehicle };
enum class Family { real_analog, synthetic };

inline const char* to_string(TimeOfDay t) { return t == TimeOfDay::day ? "day" : "night"; }
inline const char* to_string(Viewpoint v) {
  switch (v) {
    case Viewpoint::overhead: return "overhead";
    case Viewpoint::angled: return "angled";
    case Viewpoint::close: return "close";
    case Viewpoint::far: return "far";
  }
  return "angled";
}
inline const char* to_string(TargetClass c) {
  return c == TargetClass::person ? "person" : "vehicle";
}
inline const char* to_string(Family f) {
  return f == Family::real_analog ? "real_analog" : "synthetic";
}

inline TimeOfDay parse_time_of_day(const std::string& s) {
  if (s == "day") return TimeOfDay::day;
  if (s == "night") return TimeOfDay::night;
  throw data_error("unknown time of day: " + s);
}
inline Viewpoint parse_viewpoint(const std::string& s) {
  if (s == "overhead") return Viewpoint::overhead;
  if (s == "angled") return Viewpoint::angled;
  if (s == "close") return Viewpoint::close;
  if (s == "far") return Viewpoint::far;
  throw data_error("unknown viewpoint: " + s);
}
inline TargetClass parse_target_class(const std::string& s) {
  if (s == "person") return TargetClass::person;
  if (s == "vehicle") return TargetClass::vehicle;
  throw data_error("unknown target class: " + s);
}
inline Family parse_family(const std::string& s) {
  if (s == "real_analog") return Family::real_analog;
  if (s == "synthetic") return Family::synthetic;
  throw data_error("unknown family: " + s);
}

// Inclusive pixel bounding box of one rendered target, clipped to the frame.
struct Annotation {
  TargetClass cls = TargetClass::person;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// ---------------------------------------------------------------------------
// Samples and datasets
// ---------------------------------------------------------------------------

struct Sample {
  Image visible;
  Image ir;  // may be empty (width 0) in unpaired pools
  Family family = Family::synthetic;
  TimeOfDay time = TimeOfDay::day;
  Viewpoint viewpoint = Viewpoint::angled;
  int background_class = 0;
  std::vector<Annotation> boxes;

  bool has_ir() const { return ir.width > 0; }
};

struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  // Order- and content-sensitive digest over every sample byte and tag.
  std::uint64_t digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto fold_u32 = [&h](std::uint32_t v) { h = fnv1a64(&v, sizeof v, h); };
    auto fold_img = [&](const Image& img) {
      fold_u32(static_cast<std::uint32_t>(img.width));
      fold_u32(static_cast<std::uint32_t>(img.height));
      fold_u32(static_cast<std::uint32_t>(img.channels));
      h = fnv1a64(img.pixels.data(), img.pixels.size(), h);
    };
    for (const Sample& s : samples) {
      fold_img(s.visible);
      fold_img(s.ir);
      fold_u32(static_cast<std::uint32_t>(s.family));
      fold_u32(static_cast<std::uint32_t>(s.time));
      fold_u32(static_cast<std::uint32_t>(s.viewpoint));
      fold_u32(static_cast<std::uint32_t>(s.background_class));
      for (const Annotation& b : s.boxes) {
        fold_u32(static_cast<std::uint32_t>(b.cls));
        fold_u32(static_cast<std::uint32_t>(b.x0));
        fold_u32(static_cast<std::uint32_t>(b.y0));
        fold_u32(static_cast<std::uint32_t>(b.x1));
        fold_u32(static_cast<std::uint32_t>(b.y1));
      }
    }
    return h;
  }
};

// ---------------------------------------------------------------------------
// Normalization between 8-bit rasters and the generators' tanh range
// ---------------------------------------------------------------------------

// t = v/127.5 - 1, shape [1, C, H, W] (planar).
template <class T>
Tensor<T> normalize(const Image& img) {
  Tensor<T> t(Shape{1, img.channels, img.height, img.width});
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t.at(0, c, y, x) = static_cast<T>(img.at(x, y, c) / T(127.5) - T(1));
  return t;
}

// Inverse map with round-half-away-from-zero and clamping. Accepts
// [C, H, W] or [1, C, H, W].
template <class T>
Image denormalize(const Tensor<T>& t) {
  Shape s = t.shape;
  if (s.size() == 4) {
    require(s[0] == 1, "denormalize: batch extent must be 1");
    s.erase(s.begin());
  }
  require(s.size() == 3, "denormalize: tensor must be [C,H,W] or [1,C,H,W]");
  const int C = s[0], H = s[1], W = s[2];
  require(C == 1 || C == 3, "denormalize: channels must be 1 or 3");
  Image img(W, H, C);
  const T* p = t.data.data();
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const long v = std::llround((static_cast<double>(*p++) + 1.0) * 127.5);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
      }
  return img;
}

// ---------------------------------------------------------------------------
// Mixing and condition splits
// ---------------------------------------------------------------------------

struct MixSpec {
  int n_real = 0;
  int n_synth = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// First k entries of a seeded permutation of [0, n).
inline std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, Rng rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace detail

// Seeded draw of n_real + n_synth samples (each pool without replacement),
// concatenated and then permuted. Provenance tags travel with the samples.
inline Dataset mix(const Dataset& real, const Dataset& synth, const MixSpec& spec) {
  require(spec.n_real >= 0 && spec.n_synth >= 0, "mix: counts must be >= 0");
  require(spec.n_real + spec.n_synth >= 1, "mix: total draw must be >= 1");
  require_data(static_cast<std::size_t>(spec.n_real) <= real.size(),
               "mix: real pool has " + std::to_string(real.size()) + " samples, need " +
                   std::to_string(spec.n_real));
  require_data(static_cast<std::size_t>(spec.n_synth) <= synth.size(),
               "mix: synthetic pool has " + std::to_string(synth.size()) + " samples, need " +
                   std::to_string(spec.n_synth));
  Rng rng(spec.seed, "mix");
  Dataset out;
  out.samples.reserve(static_cast<std::size_t>(spec.n_real) + spec.n_synth);
  for (std::size_t i : detail::draw_without_replacement(
           real.size(), static_cast<std::size_t>(spec.n_real), rng.child("real")))
    out.samples.push_back(real.samples[i]);
  for (std::size_t i : detail::draw_without_replacement(
           synth.size(), static_cast<std::size_t>(spec.n_synth), rng.child("synth")))
    out.samples.push_back(synth.samples[i]);
  Rng perm = rng.child("perm");
  for (std::size_t i = out.samples.size(); i > 1; --i)
    std::swap(out.samples[i - 1], out.samples[static_cast<std::size_t>(perm.below(i))]);
  return out;
}

// Stable partition into (matching, rest).
inline std::pair<Dataset, Dataset> split_by_condition(
    const Dataset& ds, const std::function<bool(const Sample&)>& predicate) {
  std::pair<Dataset, Dataset> out;
  for (const Sample& s : ds.samples)
    (predicate(s) ? out.first : out.second).samples.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// On-disk layout: per-sample pixmaps plus a manifest.tsv, one line per
// sample: index<TAB>family<TAB>time<TAB>viewpoint<TAB>background_class<TAB>
// visible_path<TAB>ir_path<TAB>box_count, then one `box: class x0 y0 x1 y1`
// line per annotation. Paths are relative to the dataset directory; a `-`
// ir_path marks an unpaired sample.
// ---------------------------------------------------------------------------

inline void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream man(fs::path(dir) / "manifest.tsv", std::ios::binary | std::ios::trunc);
  require_data(man.good(), dir + ": cannot write manifest");
  char name[32];
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    std::snprintf(name, sizeof name, "vis_%04zu.ppm", i);
    const std::string vis_rel = name;
    write_image(s.visible, (fs::path(dir) / vis_rel).string());
    std::string ir_rel = "-";
    if (s.has_ir()) {
      std::snprintf(name, sizeof name, "ir_%04zu.pgm", i);
      ir_rel = name;
      write_image(s.ir, (fs::path(dir) / ir_rel).string());
    }
    man << i << '\t' << to_string(s.family) << '\t' << to_string(s.time) << '\t'
        << to_string(s.viewpoint) << '\t' << s.background_class << '\t' << vis_rel << '\t'
        << ir_rel << '\t' << s.boxes.size() << '\n';
    for (const Annotation& b : s.boxes)
      man << "box: " << to_string(b.cls) << ' ' << b.x0 << ' ' << b.y0 << ' ' << b.x1 << ' '
          << b.y1 << '\n';
  }
  require_data(man.good(), dir + ": manifest write failed");
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream man(fs::path(dir) / "manifest.tsv", std::ios::binary);
  require_data(man.good(), dir + ": cannot open manifest.tsv");
  Dataset ds;
  std::string line;
  int pending_boxes = 0;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    if (line.rfind("box: ", 0) == 0) {
      require_data(pending_boxes > 0 && !ds.samples.empty(),
                   dir + ": unexpected box line in manifest");
      std::istringstream bs(line.substr(5));
      std::string cls;
      Annotation b;
      bs >> cls >> b.x0 >> b.y0 >> b.x1 >> b.y1;
      require_data(!bs.fail(), dir + ": malformed box line: " + line);
      b.cls = parse_target_class(cls);
      ds.samples.back().boxes.push_back(b);
      --pending_boxes;
      continue;
    }
    require_data(pending_boxes == 0, dir + ": manifest box count mismatch");
    std::istringstream ls(line);
    std::string index, family, time, viewpoint, bg, vis_rel, ir_rel, box_count;
    std::getline(ls, index, '\t');
    std::getline(ls, family, '\t');
    std::getline(ls, time, '\t');
    std::getline(ls, viewpoint, '\t');
    std::getline(ls, bg, '\t');
    std::getline(ls, vis_rel, '\t');
    std::getline(ls, ir_rel, '\t');
    std::getline(ls, box_count, '\t');
    require_data(!box_count.empty(), dir + ": malformed manifest line: " + line);
    Sample s;
    s.family = parse_family(family);
    s.time = parse_time_of_day(time);
    s.viewpoint = parse_viewpoint(viewpoint);
    try {
      s.background_class = std::stoi(bg);
      pending_boxes = std::stoi(box_count);
    } catch (const std::exception&) {
      throw data_error(dir + ": malformed manifest numbers: " + line);
    }
    require_data(pending_boxes >= 0, dir + ": negative box count");
    s.visible = read_image((fs::path(dir) / vis_rel).string());
    if (ir_rel != "-") {
      s.ir = read_image((fs::path(dir) / ir_rel).string());
      require_data(s.visible.width == s.ir.width && s.visible.height == s.ir.height,
                   dir + ": paired images must share extents");
    }
    ds.samples.push_back(std::move(s));
  }
  require_data(pending_boxes == 0, dir + ": manifest ended mid-annotation");
  return ds;
}

}  // namespace v2ir
