#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "epdet/digest.hpp"

namespace epdet {

// Deterministic RNG wrapper. std::mt19937_64 has a fully specified output
// sequence, but the std distributions do not, so every draw we depend on
// for reproducibility is implemented here by hand.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t next_below(uint64_t n) {
    // Multiply-shift; bias is negligible for the n we use and the mapping
    // is fixed, which is what matters for reproducibility.
    return static_cast<uint64_t>(
        (static_cast<__uint128_t>(engine_()) * n) >> 64);
  }

  // Uniform integer in [lo, hi] inclusive.
  int64_t next_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(next_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller, pair cached.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(next_below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // Draws k distinct indices from [0, n) in selection order.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + static_cast<size_t>(next_below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Derives a child seed from a master seed and a purpose tag, so unrelated
// draws never share a stream.
inline uint64_t derive_seed(uint64_t master, std::string_view tag,
                            uint64_t index = 0) {
  uint64_t h = fnv1a64_mix(kFnvOffsetBasis, master);
  h = fnv1a64(tag, h);
  h = fnv1a64_mix(h, index);
  return h;
}

}  // namespace epdet
