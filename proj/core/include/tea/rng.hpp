#pragma once

#include <cstdint>
#include <random>

namespace tea {

inline std::mt19937 make_rng(std::uint64_t seed) {
  return std::mt19937(static_cast<std::mt19937::result_type>(seed));
}

// splitmix64 finalizer; used to derive independent per-item seeds from a
// master seed without correlated low bits.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a, the digest used by the clip and checkpoint formats.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tea
