#pragma once

#include <cmath>
#include <cstdint>

namespace rvf {

// splitmix64 step. Used to expand seed material and to derive sub-stream
// seeds. The constants are the canonical ones from Vigna's reference code.
inline std::uint64_t splitmix64_next(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministically combine a master seed with up to two stream ids
// (e.g. method index and replicate index) into an independent seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  std::uint64_t s = master ^ 0x6a09e667f3bcc909ULL;
  s += 0x9e3779b97f4a7c15ULL * (a + 1);
  std::uint64_t z = splitmix64_next(s);
  s ^= z + 0x9e3779b97f4a7c15ULL * (b + 1);
  return splitmix64_next(s);
}

// xoshiro256** by Blackman & Vigna, seeded through splitmix64.
//
// Every random draw in this library goes through this class rather than
// <random> distributions, whose output is implementation defined. With a
// fixed generator and fixed conversion rules, trajectories and experiment
// outputs are bit-reproducible across platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    for (auto& word : s_) word = splitmix64_next(seed);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 significant bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Uniform integer in [0, n). Fixed-point multiply-high; the bias of
  // roughly n / 2^64 is irrelevant at the scales used here.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  // Standard normal via Box-Muller (cosine branch only, no cached spare,
  // so the draw count per call is fixed).
  double normal() {
    double u1 = unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

}  // namespace rvf
