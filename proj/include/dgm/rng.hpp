#pragma once

#include <cstdint>
#include <vector>

namespace dgm {

// splitmix64 finalizer. All derived seeds in the project go through this,
// so stream identity is a pure function of (seed, tag, indices) and layer or
// epoch count changes never reshuffle earlier streams.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(mix64(a) ^ b); }

inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) {
  return mix64(mix64(a, b) ^ c);
}

inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return mix64(mix64(a, b, c) ^ d);
}

// Stream tags. Keeping them distinct guarantees e.g. that a dropout-rate
// change can never perturb the data split or weight init.
enum StreamTag : uint64_t {
  kStreamInit = 0x01,
  kStreamSplit = 0x02,
  kStreamShuffle = 0x03,
  kStreamAugment = 0x04,
  kStreamDropout = 0x05,
  kStreamSynthetic = 0x06,
};

// Deterministic counter-based stream (splitmix64 walk). Cheap to fork,
// identical on every platform.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1), 24 bits of mantissa.
  float next_u01() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
  }

  float next_uniform(float lo, float hi) {
    return lo + (hi - lo) * next_u01();
  }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace dgm
