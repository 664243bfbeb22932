#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace nglr {

// splitmix64 step (Vigna). Good enough statistically for Monte Carlo work and
// trivially splittable, which is what the replication engine needs: stream
// (seed, id) is reproducible in isolation regardless of thread schedule.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Collapses (seed, a, b) into one well-mixed 64-bit stream id.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64_next(s);
  s ^= a + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix64_next(s);
  s ^= b + 0xd1b54a32d192ed03ULL;
  h ^= splitmix64_next(s);
  return h;
}

// Counter-based generator with explicit draw algorithms (Box-Muller etc.) so
// that output is bit-identical across platforms and thread counts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(derive_seed(seed, stream)) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // uniform on (0,1), never exactly 0 or 1
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  // standard normal via Box-Muller; second value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Student t with 5 degrees of freedom, unscaled
  double student_t5() {
    const double z = normal();
    double chi2 = 0.0;
    for (int i = 0; i < 5; ++i) {
      const double g = normal();
      chi2 += g * g;
    }
    return z / std::sqrt(chi2 / 5.0);
  }

  // Laplace(0,1), density exp(-|x|)/2
  double laplace() {
    const double u = uniform01() - 0.5;
    const double sign = (u >= 0.0) ? 1.0 : -1.0;
    return -sign * std::log1p(-2.0 * std::fabs(u));
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nglr
