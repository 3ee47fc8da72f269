#pragma once

// Deterministic, splittable random number generation. All stochastic code in
// the library draws through Rng so that a (seed, substream index) pair pins
// the realization bit-for-bit, independent of platform libraries and of how
// work is distributed across tasks.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace jdfilter {

// SplitMix64 output function; also used to derive substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Substream seed for (seed, index); index 0 is distinct from the base seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 1));
}

// xoshiro256++ seeded through SplitMix64. Normal variates use Box-Muller so
// the draw sequence is fully pinned by this header (std::normal_distribution
// is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) {
      w = mix64(sm);
      sm = w;
    }
    // xoshiro must not start in the all-zero state.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[3] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal (Box-Muller, second value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Exponential with the given rate; +inf for rate <= 0 (a clock that never
  // fires).
  double exponential(double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -std::log(u) / rate;
  }

  // Independent stream derived from the base seed, not the current state, so
  // substream layouts do not depend on consumption order.
  Rng substream(std::uint64_t index) const { return Rng(derive_seed(base_seed_, index)); }

  std::uint64_t base_seed() const { return base_seed_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  std::uint64_t base_seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace jdfilter
