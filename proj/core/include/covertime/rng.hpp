#pragma once

// Deterministic random number generation.
//
// Everything here is implemented from first principles rather than through
// <random> because the distribution algorithms in the standard library are
// implementation-defined: reruns must produce byte-identical output for a
// fixed seed, on any toolchain, with any worker count.  The generator is
// xoshiro256++ seeded through SplitMix64; parallel tasks derive disjoint
// streams with substream().

#include <bit>
#include <cmath>
#include <cstdint>
#include <utility>

namespace covertime {

inline constexpr std::uint64_t kDefaultSeed = 0xC0FFEE;

// SplitMix64: used for seeding and for deriving substream keys.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t s) : state(s) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

// Counter-mode keyed mix of the run seed and a task index.  Tasks get
// reproducible, effectively independent streams regardless of how they are
// scheduled across workers.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 key(seed);
  std::uint64_t k = key.next();
  SplitMix64 ctr(k ^ (index * 0x9e3779b97f4a7c15ull + 0xbf58476d1ce4e5b9ull));
  std::uint64_t a = ctr.next();
  std::uint64_t b = ctr.next();
  return a ^ std::rotr(b, 23);
}

// xoshiro256++ (Blackman & Vigna), public-domain construction.
struct Xoshiro256pp {
  std::uint64_t s[4];

  explicit Xoshiro256pp(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s) w = sm.next();
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

class Rng {
 public:
  explicit Rng(std::uint64_t stream_id) : gen_(stream_id) {}

  std::uint64_t next_u64() { return gen_.next(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_.next() >> 11) * 0x1.0p-53;
  }

  // Uniform in the open interval (0,1); safe as a log() argument.
  double uniform_pos() {
    return (static_cast<double>(gen_.next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform_range(double a, double b) { return a + (b - a) * uniform(); }

  // Unbiased integer in {0, ..., n-1} by rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    for (;;) {
      std::uint64_t u = gen_.next();
      if (u < limit) return u % n;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller pair; the workhorse for 2D increments.
  std::pair<double, double> normal2() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    return {r * std::cos(th), r * std::sin(th)};
  }

  double normal() { return normal2().first; }

  double exponential(double mean = 1.0) {
    return -mean * std::log(uniform_pos());
  }

  // Geometric on {0,1,2,...} with P[k] = 2^{-(k+1)}: position of the first
  // set bit in a fair bit stream.
  std::int64_t geometric_half() {
    std::int64_t base = 0;
    for (;;) {
      std::uint64_t u = gen_.next();
      if (u != 0) return base + std::countr_zero(u);
      base += 64;
    }
  }

  // Geometric on {1,2,...} with success probability p (inverse CDF).
  std::int64_t geometric_from_one(double p) {
    if (p >= 1.0) return 1;
    const double u = uniform_pos();
    return 1 + static_cast<std::int64_t>(std::floor(std::log(u) / std::log1p(-p)));
  }

  // Exact Poisson: sequential inversion for small means, Hormann's PTRS
  // transformed rejection for large ones.
  std::int64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 12.0) return poisson_inversion(lambda);
    return poisson_ptrs(lambda);
  }

  // Gamma with integer shape (sum of exponentials in log space).
  double gamma_int(std::int64_t shape, double scale) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < shape; ++i) acc += std::log(uniform_pos());
    return -scale * acc;
  }

  // Gamma with real shape, unit scale: Marsaglia-Tsang squeeze for
  // shape >= 1, boosted by U^{1/shape} below 1.  O(1) for any shape.
  double gamma(double shape) {
    if (shape <= 0.0) return 0.0;
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
      double x = 0.0;
      double v = 0.0;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  std::int64_t poisson_inversion(double lambda) {
    const double el = std::exp(-lambda);
    double prod = 1.0;
    std::int64_t k = 0;
    prod *= uniform();
    while (prod > el) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::int64_t poisson_ptrs(double mu) {
    const double b = 0.931 + 2.53 * std::sqrt(mu);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mu = std::log(mu);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mu + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          k * log_mu - mu - std::lgamma(k + 1.0)) {
        return static_cast<std::int64_t>(k);
      }
    }
  }

  Xoshiro256pp gen_;
};

}  // namespace covertime
