#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "v2ir/common.hpp"
#include "v2ir/tensor.hpp"

namespace v2ir {

namespace detail {
// SplitMix64 finalizer; the whole generator is a pure function of
// (key, counter), which is what makes streams order-independent.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based, splittable generator. A stream is identified by
// (seed, label); identical (seed, label, call sequence) gives identical
// output, and distinct labels give independent streams. child() derives a
// new stream without disturbing the parent's counter.
class Rng {
 public:
  Rng() : Rng(0, "root") {}
  Rng(std::uint64_t seed, std::string_view label)
      : seed_(seed), label_(label), key_(derive_key(seed, label)), counter_(0) {}

  Rng child(std::string_view sublabel) const {
    return Rng(seed_, label_ + "/" + std::string(sublabel));
  }
  Rng child(std::string_view sublabel, std::uint64_t index) const {
    return Rng(seed_, label_ + "/" + std::string(sublabel) + "#" + std::to_string(index));
  }

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  std::uint64_t next_u64() {
    return detail::mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ull);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  int range_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  // Standard normal via Box-Muller; draws two uniforms per call so the
  // call sequence stays trivially reproducible.
  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, std::string_view label) {
    return detail::mix64(fnv1a64(label) ^ detail::mix64(seed + 0x9e3779b97f4a7c15ull));
  }

  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

// I.i.d. normal draws with the given moments. std = 0 degenerates to the
// constant `mean`.
template <class T>
Tensor<T> gaussian_init(Shape shape, double mean, double std, Rng& rng) {
  require(std::isfinite(mean) && std::isfinite(std), "gaussian_init: mean/std must be finite");
  require(std >= 0.0, "gaussian_init: std must be >= 0");
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.normal(mean, std));
  return t;
}

}  // namespace v2ir
