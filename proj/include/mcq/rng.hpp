#pragma once

#include <cmath>
#include <cstdint>

namespace mcq {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based stream keyed by (seed, stream id). Splitting by stream id keeps
// parallel draws identical to sequential ones.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull))) {}

  std::uint64_t next_u64() { return splitmix64(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

  // Uniform in the open interval (0, 1); exact 0 is rejected.
  double uniform_open() {
    for (;;) {
      double u = double(next_u64() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double gumbel() { return -std::log(-std::log(uniform_open())); }

  // Standard normal via Box-Muller (one value per call, deterministic across platforms).
  double normal() {
    double u1 = uniform_open(), u2 = uniform_open();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
      std::uint64_t v = next_u64();
      if (v < limit) return v % bound;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mcq
