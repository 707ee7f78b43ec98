#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace viref {

// FNV-1a, used to derive stable per-component seeds from (seed, name).
// std::hash is implementation-defined, so it is not used here.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, std::string_view component) {
  return splitmix64(seed ^ splitmix64(fnv1a64(component)));
}

// Deterministic RNG wrapper. mt19937_64 output is pinned by the standard;
// uniform/normal are generated without std::*_distribution so that streams
// are reproducible across library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // in [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // in [0, n)
  uint64_t uniform_int(uint64_t n) {
    // modulo bias is irrelevant at the alphabet sizes used here
    return gen_() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace viref
