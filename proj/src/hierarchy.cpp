#include "ldpr/hierarchy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ldpr/errors.hpp"

namespace ldpr {

namespace {

std::uint64_t checked_pow(std::uint64_t base, std::uint32_t exp) {
  std::uint64_t out = 1;
  for (std::uint32_t i = 0; i < exp; ++i) {
    if (out > (1ULL << 62) / base) throw capacity_error("tree too large");
    out *= base;
  }
  return out;
}

}  // namespace

TreeLayout TreeLayout::for_domain(std::uint64_t domain, std::uint32_t b) {
  if (b < 2) throw std::domain_error("branching factor must be at least 2");
  if (domain == 0) throw std::domain_error("domain must be non-empty");
  TreeLayout layout;
  layout.b = b;
  layout.domain = domain;
  layout.height = 1;
  layout.leaves = b;
  while (layout.leaves < domain) {
    layout.leaves = checked_pow(b, ++layout.height);
  }
  return layout;
}

std::uint64_t TreeLayout::nodes_at(std::uint32_t level) const {
  return checked_pow(b, level);
}

std::uint64_t TreeLayout::subtree_leaves(std::uint32_t level) const {
  return checked_pow(b, height - level);
}

std::uint64_t TreeLayout::ancestor(std::uint64_t item,
                                   std::uint32_t level) const {
  return item / subtree_leaves(level);
}

std::uint64_t TreeLayout::total_nodes() const {
  std::uint64_t count = 0;
  for (std::uint32_t l = 0; l <= height; ++l) count += nodes_at(l);
  return count;
}

BAdicCover b_adic_decompose(std::uint64_t a, std::uint64_t b,
                            const TreeLayout& layout) {
  if (a > b || b >= layout.domain) {
    throw std::domain_error("range [" + std::to_string(a) + ", " +
                            std::to_string(b) + "] outside domain of size " +
                            std::to_string(layout.domain));
  }
  BAdicCover cover;
  std::uint64_t lo = a;
  while (lo <= b) {
    // Largest aligned block that starts at lo and stays inside [lo, b].
    // Block size is capped one level under the root, so a full-domain query
    // decomposes into the b children of the root rather than the root itself.
    std::uint64_t size = 1;
    while (size < layout.subtree_leaves(1) && lo % (size * layout.b) == 0 &&
           lo + size * layout.b - 1 <= b) {
      size *= layout.b;
    }
    std::uint32_t level = layout.height;
    std::uint64_t s = size;
    while (s > 1) {
      s /= layout.b;
      --level;
    }
    cover.push_back(BAdicBlock{level, lo / size, lo, lo + size - 1});
    lo += size;
  }
  return cover;
}

// --- Encoding / aggregation -----------------------------------------------------

LevelReport hh_encode_user(std::uint64_t item, const TreeLayout& layout,
                           const PrivacySpec& priv, InnerOracle oracle,
                           SplitMix64& rng) {
  if (item >= layout.domain) {
    throw std::domain_error("item outside domain");
  }
  LevelReport report;
  report.level = static_cast<std::uint32_t>(1 + rng.below(layout.height));
  const DomainSpec level_domain(layout.nodes_at(report.level));
  const std::uint64_t node = layout.ancestor(item, report.level);
  if (oracle == InnerOracle::kOue) {
    report.inner = oue_perturb(node, level_domain, priv, rng);
  } else {
    report.inner = hrr_perturb(node, level_domain, priv, rng);
  }
  return report;
}

HhAccumulator::HhAccumulator(const TreeLayout& layout_in, InnerOracle oracle_in)
    : layout(layout_in), oracle(oracle_in), level_reports(layout_in.height, 0) {
  for (std::uint32_t l = 1; l <= layout.height; ++l) {
    const DomainSpec level_domain(layout.nodes_at(l));
    if (oracle == InnerOracle::kOue) {
      one_counts.emplace_back(level_domain.d, 0);
    } else {
      hadamard.emplace_back(level_domain.padded_d);
    }
  }
}

void HhAccumulator::add(const LevelReport& report) {
  if (report.level < 1 || report.level > layout.height) {
    throw std::domain_error("report level outside tree");
  }
  const std::size_t slot = report.level - 1;
  if (oracle == InnerOracle::kOue) {
    const auto& inner = std::get<OueReport>(report.inner);
    auto& ones = one_counts[slot];
    if (inner.bits.size() != ones.size()) {
      throw std::invalid_argument("report length does not match level");
    }
    for (std::size_t j = 0; j < ones.size(); ++j) ones[j] += inner.bits[j];
  } else {
    const auto& inner = std::get<HrrReport>(report.inner);
    hadamard[slot].add(inner.index, inner.bit);
  }
  ++level_reports[slot];
}

void HhAccumulator::merge(const HhAccumulator& other) {
  if (other.layout.leaves != layout.leaves || other.oracle != oracle) {
    throw std::invalid_argument("accumulator shapes differ");
  }
  for (std::size_t l = 0; l < level_reports.size(); ++l) {
    level_reports[l] += other.level_reports[l];
    if (oracle == InnerOracle::kOue) {
      for (std::size_t j = 0; j < one_counts[l].size(); ++j) {
        one_counts[l][j] += other.one_counts[l][j];
      }
    } else {
      hadamard[l].merge(other.hadamard[l]);
    }
  }
}

NodeEstimates hh_finalize(const HhAccumulator& acc, const PrivacySpec& priv) {
  NodeEstimates est;
  est.layout = acc.layout;
  est.level_values.resize(acc.layout.height + 1);
  est.level_reports.assign(acc.layout.height + 1, 0);
  est.level_values[0] = {1.0};  // the total mass is known, not estimated
  for (std::uint32_t l = 1; l <= acc.layout.height; ++l) {
    const std::int64_t n_l = acc.level_reports[l - 1];
    if (n_l == 0) throw missing_level_error(l);
    est.level_reports[l] = n_l;
    const DomainSpec level_domain(acc.layout.nodes_at(l));
    if (acc.oracle == InnerOracle::kOue) {
      est.level_values[l] =
          oue_estimate_from_counts(acc.one_counts[l - 1], n_l, priv).theta_hat;
    } else {
      auto theta = hrr_finalize(acc.hadamard[l - 1], level_domain, priv)
                       .theta_hat;
      theta.resize(level_domain.d);  // drop the power-of-two padding tail
      est.level_values[l] = std::move(theta);
    }
  }
  return est;
}

NodeEstimates hh_aggregate(std::span<const LevelReport> reports,
                           const TreeLayout& layout, const PrivacySpec& priv,
                           InnerOracle oracle) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  HhAccumulator acc(layout, oracle);
  for (const auto& r : reports) acc.add(r);
  return hh_finalize(acc, priv);
}

double hh_answer_range(const NodeEstimates& est, std::uint64_t a,
                       std::uint64_t b) {
  double total = 0.0;
  for (const auto& block : b_adic_decompose(a, b, est.layout)) {
    total += est.value(block.level, block.index);
  }
  return total;
}

// --- Predictors -------------------------------------------------------------------

double hh_variance_bound(const TreeLayout& layout, std::uint64_t r,
                         const PrivacySpec& priv, std::int64_t n) {
  if (r == 0 || r > layout.leaves) throw std::domain_error("bad range length");
  const double vf = variance_formula(Mechanism::kOue, priv, n);
  // Guard the ceil against log() landing a hair above an exact power.
  const double log_r =
      std::log(static_cast<double>(r)) / std::log(layout.b);
  const double levels = std::ceil(log_r - 1e-9) + 1.0;
  return (2.0 * layout.b - 1.0) * vf * layout.height * levels;
}

double hh_avg_error_bound(std::uint32_t b, std::uint64_t d,
                          const PrivacySpec& priv, std::int64_t n) {
  if (b < 2 || d < 2) throw std::domain_error("bad tree shape");
  const double vf = variance_formula(Mechanism::kOue, priv, n);
  const double dd = static_cast<double>(d);
  const double log_b = std::log(static_cast<double>(b));
  const double depth = std::log(dd) / log_b;
  const double tail = std::log(3.0 * dd * dd / (1.0 + 2.0 * dd)) / log_b;
  return 2.0 * (b - 1.0) * vf * depth * tail;
}

double flat_range_variance(std::uint64_t r, const PrivacySpec& priv,
                           std::int64_t n) {
  return static_cast<double>(r) * variance_formula(Mechanism::kOue, priv, n);
}

double flat_avg_error(std::uint64_t d, const PrivacySpec& priv,
                      std::int64_t n) {
  return (static_cast<double>(d) + 2.0) *
         variance_formula(Mechanism::kOue, priv, n) / 3.0;
}

double optimal_branching_pre_ci() {
  // d/db [2 (b - 1) / ln^2 b] = 0  <=>  b ln b - 2 b + 2 = 0.
  double lo = 2.0, hi = 16.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f = mid * std::log(mid) - 2.0 * mid + 2.0;
    (f < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ldpr
