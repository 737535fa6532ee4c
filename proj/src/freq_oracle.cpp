#include "ldpr/freq_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ldpr/errors.hpp"

namespace ldpr {

namespace {

void require_item(std::uint64_t item, std::uint64_t d) {
  if (item >= d) {
    throw std::domain_error("item " + std::to_string(item) +
                            " outside domain of size " + std::to_string(d));
  }
}

void require_reports(std::size_t n) {
  if (n == 0) throw std::invalid_argument("no reports to aggregate");
}

}  // namespace

// --- OUE ---------------------------------------------------------------------

OueReport oue_perturb(std::uint64_t item, const DomainSpec& domain,
                      const PrivacySpec& priv, SplitMix64& rng) {
  require_item(item, domain.d);
  const double q = 1.0 / (priv.e_eps + 1.0);
  OueReport report;
  report.bits.resize(domain.d);
  for (std::uint64_t j = 0; j < domain.d; ++j) {
    const double p_one = (j == item) ? 0.5 : q;
    report.bits[j] = rng.bernoulli(p_one) ? 1 : 0;
  }
  return report;
}

FrequencyEstimate oue_estimate_from_counts(std::span<const std::int64_t> ones,
                                           std::int64_t n,
                                           const PrivacySpec& priv) {
  if (n <= 0) throw std::invalid_argument("aggregation needs n > 0 reports");
  const double q = 1.0 / (priv.e_eps + 1.0);
  const double denom = 0.5 - q;  // positive for every eps > 0
  FrequencyEstimate est;
  est.n_reports = n;
  est.theta_hat.resize(ones.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t z = 0; z < ones.size(); ++z) {
    est.theta_hat[z] = (static_cast<double>(ones[z]) * inv_n - q) / denom;
  }
  return est;
}

void OueAccumulator::add(const OueReport& report) {
  if (report.bits.size() != ones.size()) {
    throw std::invalid_argument("report length does not match domain");
  }
  for (std::size_t j = 0; j < ones.size(); ++j) ones[j] += report.bits[j];
  ++n;
}

void OueAccumulator::merge(const OueAccumulator& other) {
  if (other.ones.size() != ones.size()) {
    throw std::invalid_argument("accumulator domains differ");
  }
  for (std::size_t j = 0; j < ones.size(); ++j) ones[j] += other.ones[j];
  n += other.n;
}

FrequencyEstimate OueAccumulator::finalize(const PrivacySpec& priv) const {
  return oue_estimate_from_counts(ones, n, priv);
}

FrequencyEstimate oue_aggregate(std::span<const OueReport> reports,
                                const DomainSpec& domain,
                                const PrivacySpec& priv) {
  require_reports(reports.size());
  OueAccumulator acc(domain.d);
  for (const auto& r : reports) acc.add(r);
  return acc.finalize(priv);
}

std::vector<std::int64_t> oue_simulate_counts(
    std::span<const std::int64_t> true_counts, const PrivacySpec& priv,
    SplitMix64& rng) {
  const double q = 1.0 / (priv.e_eps + 1.0);
  std::int64_t n = 0;
  for (const auto c : true_counts) {
    if (c < 0) throw std::domain_error("negative count");
    n += c;
  }
  std::vector<std::int64_t> ones(true_counts.size());
  for (std::size_t z = 0; z < true_counts.size(); ++z) {
    ones[z] =
        binomial(rng, true_counts[z], 0.5) + binomial(rng, n - true_counts[z], q);
  }
  return ones;
}

// --- OLH ---------------------------------------------------------------------

OlhScheme olh_scheme(const PrivacySpec& priv, std::uint32_t g) {
  if (g < 2) throw std::domain_error("hash range must be at least 2");
  OlhScheme scheme;
  scheme.g = g;
  scheme.p_keep = priv.e_eps / (priv.e_eps + g - 1.0);
  scheme.p_other = 1.0 / (priv.e_eps + g - 1.0);
  return scheme;
}

OlhScheme olh_scheme(const PrivacySpec& priv) {
  const double raw = std::round(priv.e_eps + 1.0);
  if (raw > static_cast<double>(1U << 30)) {
    throw capacity_error("hash range e^eps + 1 exceeds 2^30");
  }
  const auto g = static_cast<std::uint32_t>(
      std::max(2.0, raw));
  return olh_scheme(priv, g);
}

std::uint32_t olh_hash(std::uint64_t key, std::uint64_t item, std::uint32_t g) {
  // Multiply-shift with per-key odd multiplier; the final fixed-point multiply
  // maps the 64-bit mix onto [0, g) without modulo bias.
  const std::uint64_t a = detail::mix64(key ^ 0x8e2db5e74a3cbf01ULL) | 1ULL;
  const std::uint64_t b = detail::mix64(key + 0x5851f42d4c957f2dULL);
  const std::uint64_t h = a * item + b;
  return static_cast<std::uint32_t>(
      (static_cast<unsigned __int128>(h) * g) >> 64);
}

OlhReport olh_perturb(std::uint64_t item, const DomainSpec& domain,
                      const OlhScheme& scheme, SplitMix64& rng) {
  require_item(item, domain.d);
  OlhReport report;
  report.hash_key = rng();
  const std::uint32_t truth = olh_hash(report.hash_key, item, scheme.g);
  // Keep-truth mass (p_keep - p_other) plus a uniform draw over all g buckets
  // yields marginals p_keep on the true bucket and p_other on each other one,
  // hence a likelihood ratio of exactly e^eps.
  const double keep = scheme.p_keep - scheme.p_other;
  if (rng.bernoulli(keep)) {
    report.value = truth;
  } else {
    report.value = static_cast<std::uint32_t>(rng.below(scheme.g));
  }
  return report;
}

OlhReport olh_perturb(std::uint64_t item, const DomainSpec& domain,
                      const PrivacySpec& priv, SplitMix64& rng) {
  return olh_perturb(item, domain, olh_scheme(priv), rng);
}

FrequencyEstimate olh_aggregate(std::span<const OlhReport> reports,
                                const DomainSpec& domain,
                                const OlhScheme& scheme) {
  require_reports(reports.size());
  std::vector<std::int64_t> support(domain.d, 0);
  for (const auto& r : reports) {
    for (std::uint64_t z = 0; z < domain.d; ++z) {
      if (olh_hash(r.hash_key, z, scheme.g) == r.value) ++support[z];
    }
  }
  const double inv_g = 1.0 / scheme.g;
  const double denom = scheme.p_keep - inv_g;
  const auto n = static_cast<std::int64_t>(reports.size());
  FrequencyEstimate est;
  est.n_reports = n;
  est.theta_hat.resize(domain.d);
  for (std::uint64_t z = 0; z < domain.d; ++z) {
    est.theta_hat[z] =
        (static_cast<double>(support[z]) / n - inv_g) / denom;
  }
  return est;
}

FrequencyEstimate olh_aggregate(std::span<const OlhReport> reports,
                                const DomainSpec& domain,
                                const PrivacySpec& priv) {
  return olh_aggregate(reports, domain, olh_scheme(priv));
}

// --- HRR ---------------------------------------------------------------------

void fast_walsh_hadamard(std::span<double> data, bool inverse) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw std::domain_error("transform length must be a power of two");
  }
  for (std::size_t half = 1; half < n; half <<= 1) {
    for (std::size_t block = 0; block < n; block += half << 1) {
      for (std::size_t i = block; i < block + half; ++i) {
        const double a = data[i];
        const double b = data[i + half];
        data[i] = a + b;
        data[i + half] = a - b;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : data) v *= scale;
  }
}

HrrReport hrr_perturb(std::uint64_t item, const DomainSpec& domain,
                      const PrivacySpec& priv, SplitMix64& rng) {
  require_item(item, domain.d);
  const double p = priv.e_eps / (1.0 + priv.e_eps);
  HrrReport report;
  report.index = rng.below(domain.padded_d);
  const int truth = hadamard_entry(item, report.index);
  report.bit = static_cast<std::int8_t>(rng.bernoulli(p) ? truth : -truth);
  return report;
}

void HadamardAccumulator::add(std::uint64_t index, int bit) {
  bit_sums[index] += bit;
  ++counts[index];
  ++n;
}

void HadamardAccumulator::merge(const HadamardAccumulator& other) {
  if (other.bit_sums.size() != bit_sums.size()) {
    throw std::invalid_argument("accumulator domains differ");
  }
  for (std::size_t j = 0; j < bit_sums.size(); ++j) {
    bit_sums[j] += other.bit_sums[j];
    counts[j] += other.counts[j];
  }
  n += other.n;
}

std::vector<double> HadamardAccumulator::coefficient_means(
    const PrivacySpec& priv) const {
  const double p = priv.e_eps / (1.0 + priv.e_eps);
  const double denom = 2.0 * p - 1.0;
  std::vector<double> means(bit_sums.size(), 0.0);
  for (std::size_t j = 0; j < bit_sums.size(); ++j) {
    if (counts[j] > 0) {
      means[j] = static_cast<double>(bit_sums[j]) /
                 (static_cast<double>(counts[j]) * denom);
    }
  }
  return means;
}

FrequencyEstimate hrr_finalize(const HadamardAccumulator& acc,
                               const DomainSpec& domain,
                               const PrivacySpec& priv) {
  if (acc.n <= 0) throw std::invalid_argument("no reports to aggregate");
  // coefficient_means estimates the +/-1-scale coefficients H * theta; one
  // inverse butterfly (division by D) turns them into frequencies.
  std::vector<double> coeffs = acc.coefficient_means(priv);
  fast_walsh_hadamard(coeffs, /*inverse=*/true);
  FrequencyEstimate est;
  est.n_reports = acc.n;
  est.theta_hat = std::move(coeffs);
  return est;
}

FrequencyEstimate hrr_aggregate(std::span<const HrrReport> reports,
                                const DomainSpec& domain,
                                const PrivacySpec& priv) {
  require_reports(reports.size());
  HadamardAccumulator acc(domain.padded_d);
  for (const auto& r : reports) acc.add(r.index, r.bit);
  return hrr_finalize(acc, domain, priv);
}

// --- Diagnostics ---------------------------------------------------------------

double variance_formula(Mechanism, const PrivacySpec& priv, std::int64_t n) {
  if (n <= 0) throw std::domain_error("population must be positive");
  const double gap = priv.e_eps - 1.0;
  return 4.0 * priv.e_eps / (static_cast<double>(n) * gap * gap);
}

namespace {

// max/min likelihood ratio over an explicit channel matrix[input][output].
double channel_max_ratio(const std::vector<std::vector<double>>& channel) {
  double worst = 0.0;
  const std::size_t outputs = channel.front().size();
  for (std::size_t o = 0; o < outputs; ++o) {
    double lo = channel.front()[o];
    double hi = lo;
    for (const auto& row : channel) {
      lo = std::min(lo, row[o]);
      hi = std::max(hi, row[o]);
    }
    if (lo <= 0.0) throw std::domain_error("channel has zero-probability output");
    worst = std::max(worst, hi / lo);
  }
  return worst;
}

double rr1_ratio(const PrivacySpec& priv) {
  const double p = priv.e_eps / (1.0 + priv.e_eps);
  return channel_max_ratio({{p, 1.0 - p}, {1.0 - p, p}});
}

double oue_ratio(const DomainSpec& domain, const PrivacySpec& priv) {
  if (domain.d > 16) {
    throw capacity_error("exact OUE enumeration supports d <= 16");
  }
  const double q = 1.0 / (priv.e_eps + 1.0);
  const auto outputs = std::size_t{1} << domain.d;
  std::vector<std::vector<double>> channel(domain.d,
                                           std::vector<double>(outputs));
  for (std::uint64_t z = 0; z < domain.d; ++z) {
    for (std::uint64_t o = 0; o < outputs; ++o) {
      double pr = 1.0;
      for (std::uint64_t j = 0; j < domain.d; ++j) {
        const bool one = (o >> j) & 1;
        const double p_one = (j == z) ? 0.5 : q;
        pr *= one ? p_one : 1.0 - p_one;
      }
      channel[z][o] = pr;
    }
  }
  return channel_max_ratio(channel);
}

double hrr_ratio(const DomainSpec& domain, const PrivacySpec& priv) {
  if (domain.padded_d > (1ULL << 12)) {
    throw capacity_error("exact HRR enumeration supports padded d <= 4096");
  }
  const double p = priv.e_eps / (1.0 + priv.e_eps);
  const std::uint64_t pd = domain.padded_d;
  std::vector<std::vector<double>> channel(domain.d,
                                           std::vector<double>(2 * pd));
  for (std::uint64_t z = 0; z < domain.d; ++z) {
    for (std::uint64_t j = 0; j < pd; ++j) {
      const int truth = hadamard_entry(z, j);
      const double keep = p / pd;
      const double flip = (1.0 - p) / pd;
      channel[z][2 * j] = (truth == 1) ? keep : flip;      // output (j, +1)
      channel[z][2 * j + 1] = (truth == 1) ? flip : keep;  // output (j, -1)
    }
  }
  return channel_max_ratio(channel);
}

double olh_inner_ratio(const DomainSpec& domain, const PrivacySpec& priv) {
  if (domain.d > (1ULL << 12)) {
    throw capacity_error("exact categorical enumeration supports d <= 4096");
  }
  const auto scheme =
      olh_scheme(priv, static_cast<std::uint32_t>(domain.d));
  std::vector<std::vector<double>> channel(
      domain.d, std::vector<double>(domain.d, scheme.p_other));
  for (std::uint64_t z = 0; z < domain.d; ++z) {
    channel[z][z] = scheme.p_keep;
  }
  return channel_max_ratio(channel);
}

double olh_ratio(const DomainSpec& domain, const PrivacySpec& priv) {
  if (domain.d > (1ULL << 12)) {
    throw capacity_error("per-key OLH enumeration supports d <= 4096");
  }
  const auto scheme = olh_scheme(priv);
  double worst = 0.0;
  // The key is drawn independently of the item, so the ratio bound must hold
  // key by key; enumerate a fixed spread of keys.
  for (std::uint64_t key = 0; key < 128; ++key) {
    const std::uint64_t k = detail::mix64(key * 0x9e3779b97f4a7c15ULL + 1);
    std::vector<std::vector<double>> channel(
        domain.d, std::vector<double>(scheme.g, scheme.p_other));
    for (std::uint64_t z = 0; z < domain.d; ++z) {
      channel[z][olh_hash(k, z, scheme.g)] = scheme.p_keep;
    }
    worst = std::max(worst, channel_max_ratio(channel));
  }
  return worst;
}

}  // namespace

double ldp_ratio_check(Mechanism mechanism, const DomainSpec& domain,
                       const PrivacySpec& priv) {
  switch (mechanism) {
    case Mechanism::kRr1:
      return rr1_ratio(priv);
    case Mechanism::kOue:
      return oue_ratio(domain, priv);
    case Mechanism::kOlh:
      return olh_ratio(domain, priv);
    case Mechanism::kOlhInner:
      return olh_inner_ratio(domain, priv);
    case Mechanism::kHrr:
      return hrr_ratio(domain, priv);
  }
  throw std::invalid_argument("unknown mechanism");
}

}  // namespace ldpr
