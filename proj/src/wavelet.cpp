#include "ldpr/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ldpr/errors.hpp"

namespace ldpr {

namespace {

constexpr double kSqrtHalf = 0.70710678118654752440;

void require_pow2(std::size_t n) {
  if (n == 0 || (n & (n - 1)) != 0) {
    throw std::domain_error("length must be a power of two");
  }
}

}  // namespace

HaarLayout HaarLayout::for_domain(std::uint64_t domain) {
  if (domain == 0) throw std::domain_error("domain must be non-empty");
  HaarLayout layout;
  layout.domain = domain;
  layout.d = std::max<std::uint64_t>(2, std::bit_ceil(domain));
  layout.h = static_cast<std::uint32_t>(std::countr_zero(layout.d));
  return layout;
}

std::vector<double> haar_transform(std::span<const double> values) {
  require_pow2(values.size());
  std::vector<double> out(values.begin(), values.end());
  std::vector<double> scratch(values.size());
  // Each pass halves the running averages and appends one detail block;
  // averaging with 1/sqrt(2) keeps the transform orthonormal.
  for (std::size_t len = values.size(); len > 1; len /= 2) {
    for (std::size_t k = 0; k < len / 2; ++k) {
      scratch[k] = (out[2 * k] + out[2 * k + 1]) * kSqrtHalf;
      scratch[len / 2 + k] = (out[2 * k] - out[2 * k + 1]) * kSqrtHalf;
    }
    std::copy(scratch.begin(), scratch.begin() + len, out.begin());
  }
  return out;
}

std::vector<double> inverse_haar(std::span<const double> coeffs) {
  require_pow2(coeffs.size());
  std::vector<double> out(coeffs.begin(), coeffs.end());
  std::vector<double> scratch(coeffs.size());
  for (std::size_t len = 2; len <= coeffs.size(); len *= 2) {
    for (std::size_t k = 0; k < len / 2; ++k) {
      scratch[2 * k] = (out[k] + out[len / 2 + k]) * kSqrtHalf;
      scratch[2 * k + 1] = (out[k] - out[len / 2 + k]) * kSqrtHalf;
    }
    std::copy(scratch.begin(), scratch.begin() + len, out.begin());
  }
  return out;
}

// --- Encoding / aggregation ------------------------------------------------------

HaarReport haar_encode_user(std::uint64_t item, const HaarLayout& layout,
                            const PrivacySpec& priv, SplitMix64& rng) {
  if (item >= layout.domain) throw std::domain_error("item outside domain");
  HaarReport report;
  report.level = static_cast<std::uint32_t>(1 + rng.below(layout.h));
  const std::uint64_t m = layout.coeffs_at(report.level);
  const std::uint64_t k = item >> report.level;
  const int sign = ((item >> (report.level - 1)) & 1) ? -1 : 1;
  // Hadamard response on the level's signed one-hot vector (+/-1 scale).
  const double p = priv.e_eps / (1.0 + priv.e_eps);
  report.inner.index = rng.below(m);
  const int truth = sign * hadamard_entry(k, report.inner.index);
  report.inner.bit =
      static_cast<std::int8_t>(rng.bernoulli(p) ? truth : -truth);
  return report;
}

HaarAccumulator::HaarAccumulator(const HaarLayout& layout_in)
    : layout(layout_in), level_reports(layout_in.h, 0) {
  for (std::uint32_t l = 1; l <= layout.h; ++l) {
    levels.emplace_back(layout.coeffs_at(l));
  }
}

void HaarAccumulator::add(const HaarReport& report) {
  if (report.level < 1 || report.level > layout.h) {
    throw std::domain_error("report level outside decomposition");
  }
  levels[report.level - 1].add(report.inner.index, report.inner.bit);
  ++level_reports[report.level - 1];
}

void HaarAccumulator::merge(const HaarAccumulator& other) {
  if (other.layout.d != layout.d) {
    throw std::invalid_argument("accumulator shapes differ");
  }
  for (std::uint32_t l = 0; l < layout.h; ++l) {
    levels[l].merge(other.levels[l]);
    level_reports[l] += other.level_reports[l];
  }
}

HaarEstimates haar_finalize(const HaarAccumulator& acc,
                            const PrivacySpec& priv) {
  HaarEstimates est;
  est.layout = acc.layout;
  est.c0 = 1.0 / std::sqrt(static_cast<double>(acc.layout.d));
  est.level_reports = acc.level_reports;
  est.detail.resize(acc.layout.h);
  for (std::uint32_t l = 1; l <= acc.layout.h; ++l) {
    if (acc.level_reports[l - 1] == 0) throw missing_level_error(l);
    const std::uint64_t m = acc.layout.coeffs_at(l);
    // coefficient_means estimates the Hadamard spectrum of the level's signed
    // one-hot mean; the inverse butterfly recovers that mean, and 2^(-l/2)
    // restores the orthonormal coefficient scale.
    std::vector<double> mean = acc.levels[l - 1].coefficient_means(priv);
    fast_walsh_hadamard(mean, /*inverse=*/true);
    const double scale = std::pow(2.0, -0.5 * static_cast<double>(l));
    for (std::uint64_t k = 0; k < m; ++k) mean[k] *= scale;
    est.detail[l - 1] = std::move(mean);
  }
  return est;
}

HaarEstimates haar_aggregate(std::span<const HaarReport> reports,
                             const HaarLayout& layout,
                             const PrivacySpec& priv) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  HaarAccumulator acc(layout);
  for (const auto& r : reports) acc.add(r);
  return haar_finalize(acc, priv);
}

std::vector<double> HaarEstimates::flat() const {
  std::vector<double> coeffs(layout.d, 0.0);
  coeffs[0] = c0;
  for (std::uint32_t l = 1; l <= layout.h; ++l) {
    for (std::uint64_t k = 0; k < layout.coeffs_at(l); ++k) {
      coeffs[layout.flat_index(l, k)] = detail[l - 1][k];
    }
  }
  return coeffs;
}

// --- Evaluation --------------------------------------------------------------------

std::vector<HaarCut> haar_cut_weights(const HaarLayout& layout,
                                      std::uint64_t a, std::uint64_t b) {
  if (a > b || b >= layout.domain) {
    throw std::domain_error("range outside domain");
  }
  std::vector<HaarCut> cuts;
  for (std::uint32_t l = 1; l <= layout.h; ++l) {
    const std::uint64_t span = 1ULL << l;
    const std::uint64_t half = span >> 1;
    const std::uint64_t k_lo = a >> l;
    const std::uint64_t k_hi = b >> l;
    for (std::uint64_t k = k_lo;; k += (k_hi - k_lo)) {
      const std::uint64_t node_lo = k * span;
      const auto overlap = [&](std::uint64_t lo, std::uint64_t hi) {
        const std::uint64_t x = std::max(a, lo);
        const std::uint64_t y = std::min(b, hi);
        return (x <= y) ? static_cast<double>(y - x + 1) : 0.0;
      };
      const double left = overlap(node_lo, node_lo + half - 1);
      const double right = overlap(node_lo + half, node_lo + span - 1);
      if (left != right) {
        cuts.push_back(HaarCut{
            l, k,
            (left - right) * std::pow(2.0, -0.5 * static_cast<double>(l))});
      }
      if (k == k_hi) break;
    }
  }
  return cuts;
}

double haar_answer_range(const HaarEstimates& est, std::uint64_t a,
                         std::uint64_t b) {
  const double r = static_cast<double>(b - a + 1);
  double answer =
      r * est.c0 / std::sqrt(static_cast<double>(est.layout.d));
  for (const auto& cut : haar_cut_weights(est.layout, a, b)) {
    answer += cut.weight * est.detail[cut.level - 1][cut.k];
  }
  return answer;
}

double haar_variance_bound(std::uint64_t d, const PrivacySpec& priv,
                           std::int64_t n) {
  require_pow2(d);
  const double vf = variance_formula(Mechanism::kHrr, priv, n);
  const double log_d = std::log2(static_cast<double>(d));
  return 0.5 * log_d * log_d * vf;
}

double haar_ratio_check(const HaarLayout& layout, const PrivacySpec& priv) {
  if (layout.d > (1ULL << 10)) {
    throw capacity_error("exact enumeration supports padded d <= 1024");
  }
  const double p = priv.e_eps / (1.0 + priv.e_eps);
  double worst = 0.0;
  // Outputs: (level, index, bit).  Pr = 1/h * 1/m * (p or 1-p) depending on
  // whether the bit matches the item's true signed coefficient entry.
  for (std::uint32_t l = 1; l <= layout.h; ++l) {
    const std::uint64_t m = layout.coeffs_at(l);
    for (std::uint64_t j = 0; j < m; ++j) {
      for (int bit = -1; bit <= 1; bit += 2) {
        double lo = 1.0, hi = 0.0;
        for (std::uint64_t item = 0; item < layout.domain; ++item) {
          const std::uint64_t k = item >> l;
          const int sign = ((item >> (l - 1)) & 1) ? -1 : 1;
          const int truth = sign * hadamard_entry(k, j);
          const double pr = (bit == truth) ? p : 1.0 - p;
          lo = std::min(lo, pr);
          hi = std::max(hi, pr);
        }
        worst = std::max(worst, hi / lo);
      }
    }
  }
  return worst;
}

}  // namespace ldpr
