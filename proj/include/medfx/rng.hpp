#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace medfx {

// splitmix64; used to derive independent substreams from one master seed so
// that parallel replicates stay reproducible regardless of thread count.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  uint64_t s = master ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

// Small self-contained generator (xoshiro256**). We avoid the std <random>
// distributions because their output is implementation-defined; this keeps
// every number in the project byte-reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via polar Box-Muller (deterministic, no cached spare)
  double normal() {
    double u, v, r2;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      r2 = u * u + v * v;
    } while (r2 >= 1.0 || r2 == 0.0);
    return u * std::sqrt(-2.0 * std::log(r2) / r2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // integer in [0, n)
  uint64_t below(uint64_t n) {
    // Lemire's unbiased bounded generation
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      uint64_t t = -n % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Fisher-Yates permutation of 0..n-1
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(below(static_cast<uint64_t>(i) + 1));
      std::swap(p[i], p[j]);
    }
    return p;
  }

  // k distinct indices from 0..n-1, in draw order
  std::vector<int> choose(int n, int k) {
    std::vector<int> p = permutation(n);
    p.resize(k);
    return p;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace medfx
