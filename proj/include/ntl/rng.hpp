#pragma once

#include <cmath>
#include <cstdint>

namespace ntl {

// SplitMix64 generator. Small, fast, and completely specified, so every
// stream we derive from a (seed, index) pair is reproducible across
// platforms and independent of scheduling.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // Independent substream for item `index` of a run seeded with `seed`.
  static Rng substream(uint64_t seed, uint64_t index) {
    Rng mix(seed);
    uint64_t a = mix.next_u64();
    return Rng(a ^ (index * 0x9e3779b97f4a7c15ull) ^ mix.next_u64());
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 usable bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Inclusive bounds. The modulo bias is < 2^-32 for any range we use.
  int uniform_int(int lo, int hi) {
    return lo + int(next_u64() % uint64_t(hi - lo + 1));
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + sd * spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return mean + sd * r * std::cos(theta);
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ntl
