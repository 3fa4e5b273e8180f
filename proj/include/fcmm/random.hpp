#pragma once

// Reproducible random streams: a master seed and a replication index map to
// an independent mt19937_64 through splitmix64, so replications can run in
// any order or on any thread.

#include <cmath>
#include <cstdint>
#include <random>

#include "fcmm/special.hpp"

namespace fcmm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  Rng(std::uint64_t master, std::uint64_t index) : eng_(stream_seed(master, index)) {}

  /// Uniform on the open interval (0, 1), 53 random bits.
  double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal() { return norm_quantile(uniform()); }
  double exponential() { return -std::log1p(-uniform()); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace fcmm
