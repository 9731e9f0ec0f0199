#ifndef FELOGIT_RNG_HPP
#define FELOGIT_RNG_HPP

#include <cstdint>

#include "felogit/stats.hpp"

namespace felogit {

// splitmix64 mixer, used both as a stream deriver and as the generator
// itself. Draws are identical across platforms and compilers, unlike the
// std:: distributions.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent substream seed from a master seed and a counter.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (counter + 1));
  splitmix64(s);
  return splitmix64(s);
}

// xoshiro256** by Blackman and Vigna.
class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
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

  // Uniform on (0,1): 53-bit mantissa, zero excluded so quantile
  // transforms stay finite.
  double uniform01() {
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-54;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() { return normal_quantile(uniform01()); }

  double logistic() { return logistic_quantile(uniform01()); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace felogit

#endif  // FELOGIT_RNG_HPP
