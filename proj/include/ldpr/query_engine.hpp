#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "ldpr/consistency.hpp"
#include "ldpr/freq_oracle.hpp"
#include "ldpr/hierarchy.hpp"
#include "ldpr/wavelet.hpp"

namespace ldpr {

struct RangeQuery {
  std::uint64_t a;
  std::uint64_t b;  // inclusive, a <= b < domain
};

enum class EstimatorKind { kFlat, kTree, kConsistentTree, kHaar };

// Uniform facade over the four estimate representations.  Flat estimates are
// prefix-summed once so every range answer is O(1); tree and wavelet backends
// answer from their native decompositions.
class Estimator {
 public:
  static Estimator flat(FrequencyEstimate est, std::uint64_t domain);
  static Estimator tree(NodeEstimates est);
  static Estimator consistent_tree(ConsistentEstimates est);
  static Estimator haar(HaarEstimates est);

  EstimatorKind kind() const { return kind_; }
  std::uint64_t domain() const { return domain_; }

  double answer_range(const RangeQuery& q) const;
  double answer_prefix(std::uint64_t b) const;
  double total_mass() const;  // answer over the whole (unpadded) domain

 private:
  Estimator() = default;

  EstimatorKind kind_ = EstimatorKind::kFlat;
  std::uint64_t domain_ = 0;
  std::vector<double> flat_prefix_;  // flat backend only
  std::variant<std::monostate, NodeEstimates, ConsistentEstimates,
               HaarEstimates>
      backend_;
};

struct QuantileResult {
  double phi = 0.0;
  std::uint64_t index = 0;      // returned domain value
  double value_error = 0.0;     // squared distance to the true quantile value
  double quantile_error = 0.0;  // |phi - true quantile level of index|
};

// Estimated prefix CDF with a running-maximum isotonic pass, shared by
// repeated quantile searches over the same estimate.
class PrefixCdf {
 public:
  explicit PrefixCdf(const Estimator& est);

  // Smallest index whose corrected prefix reaches phi * total.  Throws
  // degenerate_estimate_error when the estimated total mass is not positive.
  std::uint64_t index_for(double phi) const;
  double total() const { return total_; }

 private:
  std::vector<double> iso_;
  double total_ = 0.0;
};

std::uint64_t quantile_index(const Estimator& est, double phi);

// Quantile search plus error bookkeeping against the true count histogram.
QuantileResult quantile(const Estimator& est, double phi,
                        std::span<const std::int64_t> true_counts);

// True phi-quantile of a count histogram (smallest index with CDF >= phi*N).
std::uint64_t true_quantile(std::span<const std::int64_t> counts, double phi);

}  // namespace ldpr
