#pragma once

#include <cmath>
#include <cstdint>

namespace geoldp {

/**
 * Counter-based pseudo-random stream (SplitMix64).
 *
 * out_k = mix(state0 + (k+1) * GAMMA), so a stream is a pure function of
 * (seed, counter) and is bit-reproducible on any platform.  Monte Carlo
 * drivers give trajectory j the stream seeded with (seed ^ j); SplitMix64's
 * finalizer decorrelates adjacent seeds.
 *
 * Normal and exponential variates are generated here explicitly instead of
 * via std::*_distribution, which is not bit-stable across standard library
 * implementations.
 */
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1), 53 significant bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as a log() argument.
  double uniform01_open_left() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the paired variate is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01_open_left();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Exponential waiting time with the given rate (rate > 0).
  double exponential(double rate) { return -std::log(uniform01_open_left()) / rate; }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream for trajectory `index` under master seed `seed`.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
  return SplitMix64(seed ^ index);
}

}  // namespace geoldp
