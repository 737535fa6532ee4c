#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldpr/consistency.hpp"
#include "ldpr/hierarchy.hpp"
#include "ldpr/privacy.hpp"
#include "ldpr/query_engine.hpp"
#include "ldpr/rng.hpp"
#include "ldpr/wavelet.hpp"

namespace ldpr {

// --- Synthetic data -------------------------------------------------------------

// Discretized, truncated Cauchy population: items are the rounded draws of
// Cauchy(center = p * d, scale = height), redrawn while outside [0, d).
struct DataSpec {
  std::uint64_t d;
  std::int64_t n;
  double p = 0.4;        // mode position as a fraction of the domain
  double height = -1.0;  // scale; anything < 0 means the default d / 10
};

// Returns the count histogram.  Sampling goes through the exact cell
// distribution (one binomial per item), which is equivalent to drawing users
// one at a time but costs O(d) instead of O(n).
std::vector<std::int64_t> sample_cauchy(const DataSpec& spec, SplitMix64& rng);

// --- Query workloads --------------------------------------------------------------

// All ranges [a, b] with a in {0, stride, 2*stride, ...} and a <= b < d.
// stride == 1 enumerates every pair (d (d + 1) / 2 queries), feasible only
// for d <= 2^16.
class QuerySet {
 public:
  QuerySet(std::uint64_t d, std::uint64_t stride);

  std::uint64_t domain() const { return d_; }
  std::uint64_t stride() const { return stride_; }
  std::uint64_t count() const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::uint64_t a = 0; a < d_; a += stride_) {
      for (std::uint64_t b = a; b < d_; ++b) fn(a, b);
    }
  }

 private:
  std::uint64_t d_;
  std::uint64_t stride_;
};

QuerySet build_query_set(std::uint64_t d, std::uint64_t stride);

// --- Methods -----------------------------------------------------------------------

// Method grammar: "flat" (OUE), "hh:B" (hierarchy), "hh_c:B" (hierarchy with
// consistency enforcement), "haar" (wavelet).
struct MethodSpec {
  EstimatorKind kind = EstimatorKind::kFlat;
  std::uint32_t b = 0;  // branching factor, tree methods only
};

MethodSpec parse_method(const std::string& text);
std::string method_name(const MethodSpec& method);

// --- Simulation ---------------------------------------------------------------------

// Each simulate_* call consumes an independent seed and is deterministic in
// (arguments, seed).  Per-user variants derive one stream per user index and
// exist as the reference implementations; fast variants draw the aggregate
// tallies directly from their exact distributions.

FrequencyEstimate simulate_flat_oue(std::span<const std::int64_t> counts,
                                    const PrivacySpec& priv,
                                    std::uint64_t seed, bool fast = true);

NodeEstimates simulate_tree_oue_fast(std::span<const std::int64_t> counts,
                                     const TreeLayout& layout,
                                     const PrivacySpec& priv,
                                     std::uint64_t seed);
NodeEstimates simulate_tree_per_user(std::span<const std::int64_t> counts,
                                     const TreeLayout& layout,
                                     const PrivacySpec& priv,
                                     InnerOracle oracle, std::uint64_t seed);

HaarEstimates simulate_haar_fast(std::span<const std::int64_t> counts,
                                 const HaarLayout& layout,
                                 const PrivacySpec& priv, std::uint64_t seed);
HaarEstimates simulate_haar_per_user(std::span<const std::int64_t> counts,
                                     const HaarLayout& layout,
                                     const PrivacySpec& priv,
                                     std::uint64_t seed);

// --- Experiments --------------------------------------------------------------------

struct ExperimentConfig {
  std::uint64_t d = 256;
  std::int64_t n = 1 << 20;
  double epsilon = 1.1;
  std::vector<MethodSpec> methods;
  double p = 0.4;
  double height = -1.0;  // < 0 means d / 10
  std::uint64_t stride = 1;
  int reps = 5;
  std::uint64_t seed = 1;
  bool use_fast_paths = true;
};

struct MethodCells {
  std::string method;
  // Index r holds the statistics of all length-r queries (index 0 unused).
  std::vector<double> mse_by_length;
  std::vector<double> mse_std_by_length;  // stddev over repetitions
  double overall_mse = 0.0;
  double overall_mse_std = 0.0;
  double overall_mae = 0.0;  // mean absolute error, the table-style metric
  double overall_mae_std = 0.0;
  double wall_ms = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<MethodCells> methods;
};

// Runs every requested method against the same per-repetition data.  The
// methods hh:B and hh_c:B share one set of noisy node estimates per
// repetition, so their comparison isolates the effect of enforcement.
ExperimentResult run_experiment(const ExperimentConfig& config);

// --- Closed-form predictor table ------------------------------------------------------

struct PredictorRow {
  std::uint64_t r;
  double flat;    // r * V_F
  double hh;      // hierarchy worst-case bound
  double hh_c;    // post-consistency bound
  double haar;    // wavelet bound (constant in r)
};

std::vector<PredictorRow> predictor_table(std::uint64_t d, std::uint32_t b,
                                          const PrivacySpec& priv,
                                          std::int64_t n,
                                          std::span<const std::uint64_t> rs);

}  // namespace ldpr
