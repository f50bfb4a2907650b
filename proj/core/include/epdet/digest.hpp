#pragma once

#include <cstdint>
#include <cstddef>
#include <string_view>

namespace epdet {

// 64-bit FNV-1a. Used both for feature hashing and for content digests
// (cache keys, config digests). The constants are the standard ones.
inline constexpr uint64_t kFnvOffsetBasis = 14695981039346656037ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline constexpr uint64_t fnv1a64(const void* data, size_t len,
                                  uint64_t seed = kFnvOffsetBasis) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline constexpr uint64_t fnv1a64(std::string_view s,
                                  uint64_t seed = kFnvOffsetBasis) {
  uint64_t h = seed;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

// Chains a 64-bit value into a digest, little-endian byte order.
inline constexpr uint64_t fnv1a64_mix(uint64_t h, uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xffu;
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace epdet
