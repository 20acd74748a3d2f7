#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace evonet {

/// Seedable xoshiro256++ generator. Hand-rolled so that draw sequences are
/// identical across standard libraries and platforms; every stochastic
/// choice in the engine goes through one of these.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    // splitmix64 seeding, as recommended by the xoshiro authors.
    uint64_t x = seed;
    for (auto& word : state_) {
      x += 0x9e3779b97f4a7c15ull;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      word = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = uint64_t(hi - lo) + 1;
    return lo + int64_t(bounded(span));
  }

  /// Uniform index on [0, n).
  uint64_t index(uint64_t n) { return bounded(n); }

  bool coin() { return (next_u64() >> 63) != 0; }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// 128-bit random identifier as 32 lowercase hex chars. Used for vertex,
  /// edge, and individual ids; never reused within an experiment.
  std::string hex_id() {
    static const char* digits = "0123456789abcdef";
    std::string out(32, '0');
    for (int half = 0; half < 2; ++half) {
      uint64_t v = next_u64();
      for (int i = 15; i >= 0; --i) {
        out[half * 16 + i] = digits[v & 0xf];
        v >>= 4;
      }
    }
    return out;
  }

  /// Derives an independent child stream.
  Rng fork() { return Rng(next_u64() ^ 0xd1b54a32d192ed03ull); }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  // Debiased modulo; bias is negligible for the span sizes used here but
  // rejection keeps the distribution exact.
  uint64_t bounded(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stable mixing for deriving per-worker seeds from an experiment seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace evonet
