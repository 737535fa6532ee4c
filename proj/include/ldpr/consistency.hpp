#pragma once

#include <cstdint>
#include <vector>

#include "ldpr/hierarchy.hpp"
#include "ldpr/privacy.hpp"

namespace ldpr {

// Estimates whose node values are exactly consistent: every internal value
// equals the sum of its children, so any evaluation strategy over the tree
// returns the same range answer.
struct ConsistentEstimates {
  TreeLayout layout;
  std::vector<std::vector<double>> level_values;  // [level][node], level 0..h

  double value(std::uint32_t level, std::uint64_t index) const {
    return level_values[level][index];
  }
};

// Stage 1: bottom-up subtree-weighted averaging.  A node whose subtree spans
// i levels (leaves count as i = 1) blends its own estimate with the sum of
// its children's averaged values using weights
// (b^i - b^(i-1)) / (b^i - 1)  and  (b^(i-1) - 1) / (b^i - 1),
// so leaves pass through unchanged.
NodeEstimates weighted_average(const NodeEstimates& est);

// Stage 2: top-down mean consistency.  Each sibling group is shifted by an
// equal share of its parent's final value minus the group's Stage-1 sum:
// out(v) = avg(v) + (out(parent) - sum_siblings avg(u)) / b.
ConsistentEstimates mean_consistency(const NodeEstimates& averaged);

// Both stages; the composition is the least-squares projection of the raw
// node estimates onto the consistent subspace.
ConsistentEstimates enforce(const NodeEstimates& est);

// Independent dense check: solve argmin_c || H c - x ||_2 where H stacks one
// 0/1 leaf-indicator row per tree node and x stacks the raw estimates, then
// rebuild every node as its subtree sum of c.  O(nodes * leaves) memory;
// refuses trees beyond ~10^4 nodes.
ConsistentEstimates least_squares_oracle(const NodeEstimates& est);

double hh_answer_range(const ConsistentEstimates& est, std::uint64_t a,
                       std::uint64_t b);

// Post-consistency worst-case range variance:
// (b + 1) * V_F * log_b(r) * log_b(d) / 2.
double post_ci_variance_bound(std::uint32_t b, std::uint64_t r,
                              std::uint64_t d, const PrivacySpec& priv,
                              std::int64_t n);

// Continuous minimizer of the post-consistency bound coefficient
// (b + 1) / (2 ln^2 b); root of b ln b - 2b - 2 = 0, approx 9.18.
double optimal_branching_post_ci();

}  // namespace ldpr
