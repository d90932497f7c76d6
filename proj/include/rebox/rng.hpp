#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace rebox {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Small deterministic generator with portable distributions. The stream is a
/// splitmix64 sequence, so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) { (void)splitmix64(state_); }

  uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Fixed-point scheme, bias < 2^-64 per draw.
  uint64_t uniform_int(uint64_t n) {
    return uint64_t(((unsigned __int128)next_u64() * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Every random decision in the pipeline draws from a stream derived from the
/// one global seed as derive_stream(seed, module_name, index). Module names
/// are listed in the README; index disambiguates repeated uses (scene number,
/// layer number, epoch, ...).
inline uint64_t derive_seed(uint64_t seed, std::string_view module, uint64_t index = 0) {
  return seed ^ fnv1a64(module) ^ (0xD1B54A32D192ED03ull * (index + 1));
}

inline Rng derive_stream(uint64_t seed, std::string_view module, uint64_t index = 0) {
  return Rng(derive_seed(seed, module, index));
}

}  // namespace rebox
