// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mass {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derive an independent sub-seed from a base seed and stream ids. Used so
// per-example / per-step randomness stays reproducible regardless of batch
// construction order.
inline uint64_t sub_seed(uint64_t seed, uint64_t a, uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ 0x6d617373u) + splitmix64(a) * 3 + b);
}

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// the distributions are hand-rolled because libstdc++'s are not.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}

  uint64_t u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int64_t index(int64_t n) { return static_cast<int64_t>(u64() % static_cast<uint64_t>(n)); }

  // Box-Muller without the spare cache: always two draws per call, so the
  // stream position is a pure function of the call count.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = static_cast<double>((u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = static_cast<double>(u64() >> 11) * 0x1.0p-53;
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    return mean + stddev * z;
  }

  // Fisher-Yates draw of k distinct values from [0, n), returned sorted.
  std::vector<int> sample_distinct(int n, int k) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) {
      int j = i + static_cast<int>(index(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace mass
