#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ldpr/freq_oracle.hpp"
#include "ldpr/privacy.hpp"
#include "ldpr/rng.hpp"

namespace ldpr {

// Dyadic Haar decomposition over a power-of-two padding of the domain.
// Detail level l in [1, h] holds d/2^l coefficients; level 1 is the finest.
// The coefficient touched by item v at level l sits at position v >> l with
// magnitude 2^(-l/2), positive iff bit (l-1) of v is zero.
struct HaarLayout {
  std::uint64_t d = 2;       // padded, power of two
  std::uint64_t domain = 2;  // unpadded size, domain <= d
  std::uint32_t h = 1;       // log2(d)

  static HaarLayout for_domain(std::uint64_t domain);

  std::uint64_t coeffs_at(std::uint32_t level) const { return d >> level; }
  // Flat index of detail coefficient (level, k) in the canonical layout
  // [average | level h | ... | level 1].
  std::uint64_t flat_index(std::uint32_t level, std::uint64_t k) const {
    return (d >> level) + k;
  }
};

// Orthonormal analysis of a length-d vector (d a power of two); output in the
// canonical layout above.  Preserves the l2 norm; inverse_haar undoes it.
std::vector<double> haar_transform(std::span<const double> values);
std::vector<double> inverse_haar(std::span<const double> coeffs);

// --- Randomized user reports ----------------------------------------------------

struct HaarReport {
  std::uint32_t level;  // sampled uniformly from [1, h]
  HrrReport inner;      // Hadamard response on the level's signed one-hot
};

HaarReport haar_encode_user(std::uint64_t item, const HaarLayout& layout,
                            const PrivacySpec& priv, SplitMix64& rng);

struct HaarAccumulator {
  explicit HaarAccumulator(const HaarLayout& layout);
  void add(const HaarReport& report);
  void merge(const HaarAccumulator& other);

  HaarLayout layout;
  std::vector<HadamardAccumulator> levels;  // [level-1]
  std::vector<std::int64_t> level_reports;  // [level-1]
};

// Estimated coefficients in orthonormal scale.  The average coefficient is
// deterministic: frequencies sum to one, so c0 = 1/sqrt(d) exactly.
struct HaarEstimates {
  HaarLayout layout;
  double c0 = 0.0;
  std::vector<std::vector<double>> detail;  // [level-1][k]
  std::vector<std::int64_t> level_reports;  // [level-1]

  std::vector<double> flat() const;  // canonical layout, for inverse_haar
};

HaarEstimates haar_aggregate(std::span<const HaarReport> reports,
                             const HaarLayout& layout,
                             const PrivacySpec& priv);
HaarEstimates haar_finalize(const HaarAccumulator& acc,
                            const PrivacySpec& priv);

// One consulted coefficient of a range evaluation: the detail (level, k)
// enters with the weight of the range indicator's analysis coefficient,
// (overlap with left half - overlap with right half) / 2^(level/2).
struct HaarCut {
  std::uint32_t level;
  std::uint64_t k;
  double weight;
};

// The <= 2 boundary cuts per level (<= h total for prefixes, since an aligned
// left edge never cuts a node).
std::vector<HaarCut> haar_cut_weights(const HaarLayout& layout,
                                      std::uint64_t a, std::uint64_t b);

// Range answer r * c0 / sqrt(d) + sum of cut weights times coefficients;
// identical to summing inverse_haar(flat()) over [a, b].
double haar_answer_range(const HaarEstimates& est, std::uint64_t a,
                         std::uint64_t b);

// Worst-case range variance log2(d)^2 * V_F / 2.
double haar_variance_bound(std::uint64_t d, const PrivacySpec& priv,
                           std::int64_t n);

// Exact channel enumeration over (level, index, bit) outputs; the maximum
// likelihood ratio equals e^eps for every domain size.
double haar_ratio_check(const HaarLayout& layout, const PrivacySpec& priv);

}  // namespace ldpr
