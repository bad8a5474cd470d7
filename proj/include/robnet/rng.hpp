#pragma once

#include <cmath>
#include <cstdint>

namespace robnet {

// SplitMix64 finalizer; used to derive stream seeds from key tuples.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream purposes keep draws for different roles statistically independent
// even when (seed, agent, iteration) coincide.
enum class StreamPurpose : std::uint64_t {
  kMinibatch = 1,
  kAttack = 2,
  kInit = 3,
  kData = 4,
  kEval = 5,
  kProbe = 6,
};

// Counter-free xoshiro256** generator with explicit keyed construction.
// Distributions are implemented on top of raw bits so that identical keys
// produce identical draws on any platform/stdlib.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& s : state_) s = mix64(z++);
  }

  static Rng keyed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                   StreamPurpose purpose) {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ mix64(a + 0x100000001ULL));
    h = mix64(h ^ mix64(b + 0x200000003ULL));
    h = mix64(h ^ static_cast<std::uint64_t>(purpose));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in {0, ..., n-1}; n must be positive.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Box-Muller without a cached spare: two uniforms per draw, stateless
  // across calls, so interleaving with other draws stays reproducible.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

}  // namespace robnet
