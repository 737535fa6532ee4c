#pragma once

// Shared helpers for the test binaries: independent oracles (naive
// transforms), summary statistics, and distribution-comparison utilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "ldpr/freq_oracle.hpp"

namespace ldpr::testing {

// O(D^2) Walsh-Hadamard multiply straight from the matrix definition.
inline std::vector<double> naive_walsh_hadamard(std::span<const double> x) {
  const std::uint64_t d = x.size();
  std::vector<double> out(d, 0.0);
  for (std::uint64_t i = 0; i < d; ++i) {
    for (std::uint64_t j = 0; j < d; ++j) {
      out[i] += hadamard_entry(i, j) * x[j];
    }
  }
  return out;
}

// Row (flat index) of the orthonormal Haar analysis matrix for a
// power-of-two domain d, in the layout [average | level h | ... | level 1]
// where level 1 is the finest.  Row 0 is the all-1/sqrt(d) average row; the
// detail row for (level l, block k) is +2^{-l/2} on the left half of block k
// and -2^{-l/2} on the right half.
inline std::vector<double> naive_haar_row(std::uint64_t d,
                                          std::uint64_t flat_index) {
  std::vector<double> row(d, 0.0);
  if (flat_index == 0) {
    const double v = 1.0 / std::sqrt(static_cast<double>(d));
    std::fill(row.begin(), row.end(), v);
    return row;
  }
  // Invert flat_index = d / 2^l + k.
  std::uint64_t l = 0;
  for (std::uint64_t probe = 1; probe <= d; ++probe) {
    const std::uint64_t m = d >> probe;
    if (flat_index >= m && flat_index < 2 * m) {
      l = probe;
      break;
    }
  }
  const std::uint64_t k = flat_index - (d >> l);
  const std::uint64_t block = k << l;
  const std::uint64_t half = 1ULL << (l - 1);
  const double mag = std::pow(2.0, -0.5 * static_cast<double>(l));
  for (std::uint64_t i = 0; i < half; ++i) row[block + i] = mag;
  for (std::uint64_t i = 0; i < half; ++i) row[block + half + i] = -mag;
  return row;
}

inline double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

inline double variance_of(std::span<const double> xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (const double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

// Two-sample Kolmogorov-Smirnov distance.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

// Critical KS distance at significance alpha (two-sided, asymptotic).
inline double ks_critical(std::size_t n, std::size_t m, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) /
                       (static_cast<double>(n) * static_cast<double>(m)));
}

// Wilson-Hilferty approximation of the chi-square quantile at upper-tail
// z standard normal deviations (z = 3.09 is roughly alpha = 0.001).
inline double chi2_critical(double df, double z) {
  const double t = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  return df * t * t * t;
}

// Spearman rank correlation (no tie handling; inputs assumed distinct).
inline double spearman(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  }
  const double nn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

}  // namespace ldpr::testing
