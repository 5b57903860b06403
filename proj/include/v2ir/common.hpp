#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace v2ir {

// Error taxonomy shared by the library and the CLI.
// usage_error   -> exit 1 (bad invocation)
// data_error    -> exit 2 (malformed files, bad datasets, contract violations on user data)
// numeric_error -> exit 3 (non-finite losses, failed numerical contracts)
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_data(bool cond, const std::string& msg) {
  if (!cond) throw data_error(msg);
}

// FNV-1a 64-bit, used for content digests (datasets, checkpoints).
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), seed);
}

}  // namespace v2ir
