// Seedable, splittable 64-bit random generator (xoshiro256++ engine,
// splitmix64 key derivation). Substreams are derived from the stream's
// key, never from its draw state, so derivation order is irrelevant and
// per-point / per-cube substreams reproduce bit-exactly.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace perfhom {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stateless key/tag combiner used for substream derivation.
inline std::uint64_t mix_key(std::uint64_t key, std::uint64_t tag) {
  std::uint64_t s = key ^ (tag * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  std::uint64_t a = splitmix64_next(s);
  return a ^ splitmix64_next(s);
}

class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t key) : key_(key) {
    std::uint64_t s = key;
    for (auto& w : s_) w = splitmix64_next(s);
  }

  std::uint64_t key() const { return key_; }

  // Derived substream; independent of how much this stream has drawn.
  Rng stream(std::uint64_t tag) const { return Rng(mix_key(key_, tag)); }

  Rng stream(std::span<const std::int64_t> tags) const {
    std::uint64_t k = key_;
    for (std::int64_t t : tags) k = mix_key(k, static_cast<std::uint64_t>(t));
    return Rng(k);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double exponential() {
    double u;
    do { u = uniform(); } while (u <= 0.0);
    return -std::log(u);
  }

  // Box-Muller; two uniforms per variate (no cached spare, keeps copies trivial).
  double normal() {
    double u1;
    do { u1 = uniform(); } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Exact Poisson sampling: Knuth product method, split by additivity for
  // large means so the per-call cost stays bounded.
  std::uint64_t poisson(double mu) {
    if (!(mu >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
    std::uint64_t total = 0;
    while (mu > 30.0) {
      total += poisson_knuth(30.0);
      mu -= 30.0;
    }
    return total + poisson_knuth(mu);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t poisson_knuth(double mu) {
    if (mu <= 0.0) return 0;
    const double limit = std::exp(-mu);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t key_;
  std::uint64_t s_[4];
};

}  // namespace perfhom
