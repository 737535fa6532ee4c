#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ldpr/freq_oracle.hpp"
#include "ldpr/privacy.hpp"
#include "ldpr/rng.hpp"

namespace ldpr {

// Full b-ary tree over a padded domain of b^height leaves.  Level 0 is the
// root (total mass, never sampled), level `height` holds the leaves.  Queries
// address the unpadded prefix [0, domain).
struct TreeLayout {
  std::uint32_t b = 2;
  std::uint32_t height = 1;
  std::uint64_t leaves = 2;   // b^height
  std::uint64_t domain = 2;   // unpadded size, domain <= leaves

  static TreeLayout for_domain(std::uint64_t domain, std::uint32_t b);

  std::uint64_t nodes_at(std::uint32_t level) const;      // b^level
  std::uint64_t subtree_leaves(std::uint32_t level) const;  // b^(height-level)
  // Index of the level-`level` ancestor of a leaf item.
  std::uint64_t ancestor(std::uint64_t item, std::uint32_t level) const;
  std::uint64_t total_nodes() const;  // all levels including the root
};

// One aligned b-adic block: node `index` at `level`, spanning leaves
// [leaf_lo, leaf_hi].
struct BAdicBlock {
  std::uint32_t level;
  std::uint64_t index;
  std::uint64_t leaf_lo;
  std::uint64_t leaf_hi;
};

using BAdicCover = std::vector<BAdicBlock>;

// Canonical greedy decomposition of [a, b] into maximal aligned blocks from
// the left.  Blocks are disjoint, cover exactly [a, b], never include the
// root, and number at most (b - 1) * (2 log_b(r) + 1) for r = b - a + 1.
BAdicCover b_adic_decompose(std::uint64_t a, std::uint64_t b,
                            const TreeLayout& layout);

// --- Randomized user reports --------------------------------------------------

enum class InnerOracle { kOue, kHrr };

struct LevelReport {
  std::uint32_t level;  // sampled uniformly from [1, height]
  std::variant<OueReport, HrrReport> inner;
};

LevelReport hh_encode_user(std::uint64_t item, const TreeLayout& layout,
                           const PrivacySpec& priv, InnerOracle oracle,
                           SplitMix64& rng);

// Per-level tallies that merge across shards.
struct HhAccumulator {
  HhAccumulator(const TreeLayout& layout, InnerOracle oracle);
  void add(const LevelReport& report);
  void merge(const HhAccumulator& other);

  TreeLayout layout;
  InnerOracle oracle;
  // OUE: per-node 1-bit counts.  HRR: per-coefficient tallies.
  std::vector<std::vector<std::int64_t>> one_counts;     // [level-1][node]
  std::vector<HadamardAccumulator> hadamard;             // [level-1]
  std::vector<std::int64_t> level_reports;               // [level-1]
};

// Unbiased per-node estimates of subtree mass.  level_values[0] is the root,
// hardwired to 1 (the total is known exactly); level_values[l][v] estimates
// the mass under node v of level l from the users who sampled that level.
struct NodeEstimates {
  TreeLayout layout;
  std::vector<std::vector<double>> level_values;  // [level][node], level 0..h
  std::vector<std::int64_t> level_reports;        // [level], level 0 unused

  double value(std::uint32_t level, std::uint64_t index) const {
    return level_values[level][index];
  }
};

NodeEstimates hh_aggregate(std::span<const LevelReport> reports,
                           const TreeLayout& layout, const PrivacySpec& priv,
                           InnerOracle oracle);
NodeEstimates hh_finalize(const HhAccumulator& acc, const PrivacySpec& priv);

// Range answer: sum of node estimates over the canonical cover of [a, b].
// Throws std::domain_error if the range leaves the unpadded domain.
double hh_answer_range(const NodeEstimates& est, std::uint64_t a,
                       std::uint64_t b);

// --- Closed-form error predictors ----------------------------------------------

// Worst-case variance of a length-r range answer (pre-consistency):
// (2b - 1) * V_F * height * (ceil(log_b r) + 1).
double hh_variance_bound(const TreeLayout& layout, std::uint64_t r,
                         const PrivacySpec& priv, std::int64_t n);

// Worst-case average squared error over all ranges:
// 2 (b - 1) * V_F * log_b(d) * log_b(3 d^2 / (1 + 2 d)).
double hh_avg_error_bound(std::uint32_t b, std::uint64_t d,
                          const PrivacySpec& priv, std::int64_t n);

// Flat-oracle counterparts for side-by-side comparison.
double flat_range_variance(std::uint64_t r, const PrivacySpec& priv,
                           std::int64_t n);
double flat_avg_error(std::uint64_t d, const PrivacySpec& priv,
                      std::int64_t n);

// Continuous minimizer of the pre-consistency bound coefficient
// 2 (b - 1) / ln^2(b); root of b ln b - 2b + 2 = 0, approx 4.92.
double optimal_branching_pre_ci();

}  // namespace ldpr
