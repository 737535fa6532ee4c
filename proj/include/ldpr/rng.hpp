#pragma once

#include <cstdint>
#include <random>

namespace ldpr {

// splitmix64 generator.  Construction is O(1), so a simulation can derive an
// independent stream for every (master seed, user index) pair and stay
// bit-reproducible no matter how the work is sharded.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, n) via Lemire rejection.
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = -n % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Deterministic seed derivation for substreams: same (master, a, b, c) always
// maps to the same stream, distinct tuples to decorrelated ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = detail::mix64(master + 0x9e3779b97f4a7c15ULL);
  s = detail::mix64(s ^ (a + 0xbf58476d1ce4e5b9ULL));
  s = detail::mix64(s ^ (b + 0x94d049bb133111ebULL));
  s = detail::mix64(s ^ (c + 0xd6e8feb86659fd93ULL));
  return s;
}

inline SplitMix64 substream(std::uint64_t master, std::uint64_t a,
                            std::uint64_t b = 0, std::uint64_t c = 0) {
  return SplitMix64(derive_seed(master, a, b, c));
}

// Per-user perturbation stream.
inline SplitMix64 user_stream(std::uint64_t master, std::uint64_t user_index) {
  return SplitMix64(derive_seed(master, 0x75736572ULL, user_index));
}

inline std::int64_t binomial(SplitMix64& rng, std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<std::int64_t> dist(n, p);
  return dist(rng);
}

}  // namespace ldpr
