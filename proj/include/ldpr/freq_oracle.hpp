#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "ldpr/privacy.hpp"
#include "ldpr/rng.hpp"

namespace ldpr {

// ---------------------------------------------------------------------------
// Flat frequency oracles: OUE, OLH and HRR.  All three debias to unbiased
// frequency estimates with per-item variance 4 e^eps / (N (e^eps - 1)^2).
// ---------------------------------------------------------------------------

struct FrequencyEstimate {
  std::vector<double> theta_hat;  // unbiased, unclipped; may go negative
  std::int64_t n_reports = 0;
};

// --- Optimized Unary Encoding ----------------------------------------------

struct OueReport {
  std::vector<std::uint8_t> bits;  // one slot per item, values 0/1
};

OueReport oue_perturb(std::uint64_t item, const DomainSpec& domain,
                      const PrivacySpec& priv, SplitMix64& rng);

// Shared debiasing step: theta_hat[z] = (S_z/N - q) / (1/2 - q) with
// q = 1 / (e^eps + 1), which is the unique affine corrector that is unbiased
// for both the hit and the miss channel.
FrequencyEstimate oue_estimate_from_counts(std::span<const std::int64_t> ones,
                                           std::int64_t n,
                                           const PrivacySpec& priv);

FrequencyEstimate oue_aggregate(std::span<const OueReport> reports,
                                const DomainSpec& domain,
                                const PrivacySpec& priv);

// Population-scale shortcut: the per-item count of 1-bits across N users is
// Binomial(c_z, 1/2) + Binomial(N - c_z, q), exactly the distribution the
// per-user loop produces.  O(D) binomial draws instead of O(N*D) coin flips.
std::vector<std::int64_t> oue_simulate_counts(
    std::span<const std::int64_t> true_counts, const PrivacySpec& priv,
    SplitMix64& rng);

// Mergeable shard accumulator for OUE aggregation.
struct OueAccumulator {
  explicit OueAccumulator(std::uint64_t d)
      : ones(d, 0) {}
  void add(const OueReport& report);
  void merge(const OueAccumulator& other);
  FrequencyEstimate finalize(const PrivacySpec& priv) const;

  std::vector<std::int64_t> ones;
  std::int64_t n = 0;
};

// --- Optimized Local Hashing ------------------------------------------------

struct OlhScheme {
  std::uint32_t g;     // hash range, defaults to max(2, round(e^eps + 1))
  double p_keep;       // marginal probability of reporting the true bucket
  double p_other;      // probability of each of the other g-1 buckets
};

OlhScheme olh_scheme(const PrivacySpec& priv);
OlhScheme olh_scheme(const PrivacySpec& priv, std::uint32_t g);

// Keyed multiply-shift hash of item into [0, g).
std::uint32_t olh_hash(std::uint64_t key, std::uint64_t item, std::uint32_t g);

struct OlhReport {
  std::uint64_t hash_key;  // per-user key, transmitted with the value
  std::uint32_t value;     // perturbed bucket in [0, g)
};

OlhReport olh_perturb(std::uint64_t item, const DomainSpec& domain,
                      const PrivacySpec& priv, SplitMix64& rng);
OlhReport olh_perturb(std::uint64_t item, const DomainSpec& domain,
                      const OlhScheme& scheme, SplitMix64& rng);

// Support-counting decode; O(N * D), intentionally only for small domains.
FrequencyEstimate olh_aggregate(std::span<const OlhReport> reports,
                                const DomainSpec& domain,
                                const PrivacySpec& priv);
FrequencyEstimate olh_aggregate(std::span<const OlhReport> reports,
                                const DomainSpec& domain,
                                const OlhScheme& scheme);

// --- Hadamard Randomized Response -------------------------------------------

// Entry (i, j) of the +/-1 Hadamard matrix: (-1)^popcount(i AND j).
inline int hadamard_entry(std::uint64_t i, std::uint64_t j) {
  return (std::popcount(i & j) & 1) ? -1 : 1;
}

// In-place Walsh-Hadamard butterfly over a power-of-two-length vector.
// Forward applies the unnormalized +/-1 matrix; inverse further divides by D,
// so inverse(forward(x)) == x.
void fast_walsh_hadamard(std::span<double> data, bool inverse = false);

struct HrrReport {
  std::uint64_t index;  // sampled Hadamard coefficient, in [0, padded_d)
  std::int8_t bit;      // +/-1, true coefficient kept w.p. e^eps/(1+e^eps)
};

HrrReport hrr_perturb(std::uint64_t item, const DomainSpec& domain,
                      const PrivacySpec& priv, SplitMix64& rng);

// Mergeable per-coefficient tally (bit sums and report counts).
struct HadamardAccumulator {
  explicit HadamardAccumulator(std::uint64_t padded)
      : bit_sums(padded, 0), counts(padded, 0) {}
  void add(std::uint64_t index, int bit);
  void merge(const HadamardAccumulator& other);
  // Unbiased per-coefficient means: O_j / (n_j (2p - 1)); 0 when unobserved.
  std::vector<double> coefficient_means(const PrivacySpec& priv) const;

  std::vector<std::int64_t> bit_sums;
  std::vector<std::int64_t> counts;
  std::int64_t n = 0;
};

FrequencyEstimate hrr_aggregate(std::span<const HrrReport> reports,
                                const DomainSpec& domain,
                                const PrivacySpec& priv);
// theta_hat spans the padded domain here; callers query the true prefix.
FrequencyEstimate hrr_finalize(const HadamardAccumulator& acc,
                               const DomainSpec& domain,
                               const PrivacySpec& priv);

// --- Shared diagnostics ------------------------------------------------------

enum class Mechanism { kRr1, kOue, kOlh, kOlhInner, kHrr };

// Asymptotic per-item estimator variance 4 e^eps / (N (e^eps - 1)^2).
double variance_formula(Mechanism mechanism, const PrivacySpec& priv,
                        std::int64_t n);

// Exact channel enumeration: the maximum likelihood ratio
// max_{z, z', output} Pr[output | z] / Pr[output | z'].  A mechanism is
// eps-locally-private iff this does not exceed e^eps.
//   kRr1      binary randomized response (domain forced to 2)
//   kOue      per-bit product channel over all 2^d outputs (d <= 16)
//   kOlh      keyed hash channel, enumerated over a fixed sample of keys
//   kOlhInner the inner categorical response with g = d buckets
//   kHrr      (index, bit) channel over the padded domain
double ldp_ratio_check(Mechanism mechanism, const DomainSpec& domain,
                       const PrivacySpec& priv);

}  // namespace ldpr
