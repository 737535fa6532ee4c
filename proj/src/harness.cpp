#include "ldpr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "ldpr/errors.hpp"

namespace ldpr {

namespace {

constexpr std::uint64_t kTagData = 0xda7a;
constexpr std::uint64_t kTagFlat = 0xf1a7;
constexpr std::uint64_t kTagTree = 0x7ee;
constexpr std::uint64_t kTagHaar = 0xaa2;

}  // namespace

// --- Data ------------------------------------------------------------------------

std::vector<std::int64_t> sample_cauchy(const DataSpec& spec, SplitMix64& rng) {
  if (spec.d == 0) throw std::domain_error("domain must be non-empty");
  if (spec.n < 0) throw std::domain_error("population must be non-negative");
  const double scale = spec.height < 0.0 ? spec.d / 10.0 : spec.height;
  const double center = spec.p * static_cast<double>(spec.d);
  std::vector<std::int64_t> counts(spec.d, 0);

  if (scale <= 0.0) {
    // Degenerate scale: every draw rounds to the center.
    const auto v = static_cast<std::int64_t>(std::llround(center));
    if (v < 0 || v >= static_cast<std::int64_t>(spec.d)) {
      throw std::domain_error("point-mass center outside domain");
    }
    counts[v] = spec.n;
    return counts;
  }

  // Exact cell distribution of "draw, round to nearest, redraw while outside
  // [0, d)": cell v carries the Cauchy mass of [v - 1/2, v + 1/2), and the
  // rejection loop just renormalizes over the in-domain cells.
  std::vector<double> weight(spec.d);
  double total = 0.0;
  for (std::uint64_t v = 0; v < spec.d; ++v) {
    const double lo = (static_cast<double>(v) - 0.5 - center) / scale;
    const double hi = (static_cast<double>(v) + 0.5 - center) / scale;
    weight[v] = std::atan(hi) - std::atan(lo);
    total += weight[v];
  }
  if (!(total > 0.0)) throw std::domain_error("no mass inside the domain");

  std::int64_t rem = spec.n;
  double wrem = total;
  for (std::uint64_t v = 0; v < spec.d && rem > 0; ++v) {
    if (v + 1 == spec.d) {
      counts[v] = rem;
      break;
    }
    const double p = std::clamp(weight[v] / wrem, 0.0, 1.0);
    counts[v] = binomial(rng, rem, p);
    rem -= counts[v];
    wrem -= weight[v];
  }
  return counts;
}

// --- Query sets --------------------------------------------------------------------

QuerySet::QuerySet(std::uint64_t d, std::uint64_t stride)
    : d_(d), stride_(stride) {
  if (d == 0) throw std::domain_error("domain must be non-empty");
  if (stride == 0) throw std::domain_error("stride must be positive");
  if (stride == 1 && d > (1ULL << 16)) {
    throw capacity_error(
        "exhaustive query sets support d <= 2^16; set a stride");
  }
}

std::uint64_t QuerySet::count() const {
  std::uint64_t total = 0;
  for (std::uint64_t a = 0; a < d_; a += stride_) total += d_ - a;
  return total;
}

QuerySet build_query_set(std::uint64_t d, std::uint64_t stride) {
  return QuerySet(d, stride);
}

// --- Method grammar -------------------------------------------------------------------

MethodSpec parse_method(const std::string& text) {
  const auto parse_branching = [&](std::size_t prefix_len) {
    const std::string digits = text.substr(prefix_len);
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("bad branching factor in '" + text + "'");
    }
    const unsigned long b = std::stoul(digits);
    if (b < 2 || b > (1UL << 16)) {
      throw std::invalid_argument("branching factor out of range in '" + text +
                                  "'");
    }
    return static_cast<std::uint32_t>(b);
  };
  if (text == "flat") return MethodSpec{EstimatorKind::kFlat, 0};
  if (text == "haar") return MethodSpec{EstimatorKind::kHaar, 0};
  if (text.rfind("hh_c:", 0) == 0) {
    return MethodSpec{EstimatorKind::kConsistentTree, parse_branching(5)};
  }
  if (text.rfind("hh:", 0) == 0) {
    return MethodSpec{EstimatorKind::kTree, parse_branching(3)};
  }
  throw std::invalid_argument(
      "unknown method '" + text + "'; expected flat, hh:B, hh_c:B or haar");
}

std::string method_name(const MethodSpec& method) {
  switch (method.kind) {
    case EstimatorKind::kFlat:
      return "flat";
    case EstimatorKind::kTree:
      return "hh:" + std::to_string(method.b);
    case EstimatorKind::kConsistentTree:
      return "hh_c:" + std::to_string(method.b);
    case EstimatorKind::kHaar:
      return "haar";
  }
  throw std::logic_error("unknown method kind");
}

// --- Simulation -----------------------------------------------------------------------

FrequencyEstimate simulate_flat_oue(std::span<const std::int64_t> counts,
                                    const PrivacySpec& priv,
                                    std::uint64_t seed, bool fast) {
  std::int64_t n = 0;
  for (const auto c : counts) n += c;
  if (n <= 0) throw std::invalid_argument("population is empty");
  if (fast) {
    SplitMix64 rng(seed);
    const auto ones = oue_simulate_counts(counts, priv, rng);
    return oue_estimate_from_counts(ones, n, priv);
  }
  const DomainSpec domain(counts.size());
  OueAccumulator acc(domain.d);
  std::uint64_t user = 0;
  for (std::uint64_t v = 0; v < counts.size(); ++v) {
    for (std::int64_t i = 0; i < counts[v]; ++i, ++user) {
      SplitMix64 rng = user_stream(seed, user);
      acc.add(oue_perturb(v, domain, priv, rng));
    }
  }
  return acc.finalize(priv);
}

namespace {

// Splits c across `cells` equally likely slots.  Dense path: one sequential
// binomial per slot.  Sparse path (few items over many slots): each item
// draws its slot directly, so a slot can receive several deposits — callers
// accumulate.  Both realize the same multinomial distribution.
template <typename Fn>
void split_uniform(SplitMix64& rng, std::int64_t c, std::uint64_t cells,
                   Fn&& deposit) {
  if (c <= 0) return;
  if (cells >= 512 && static_cast<std::uint64_t>(c) < cells / 8) {
    for (std::int64_t i = 0; i < c; ++i) deposit(rng.below(cells), 1);
    return;
  }
  std::int64_t rem = c;
  for (std::uint64_t i = 0; i < cells && rem > 0; ++i) {
    std::int64_t share;
    if (i + 1 == cells) {
      share = rem;
    } else {
      share = binomial(rng, rem, 1.0 / static_cast<double>(cells - i));
    }
    if (share > 0) deposit(i, share);
    rem -= share;
  }
}

}  // namespace

NodeEstimates simulate_tree_oue_fast(std::span<const std::int64_t> counts,
                                     const TreeLayout& layout,
                                     const PrivacySpec& priv,
                                     std::uint64_t seed) {
  if (counts.size() != layout.domain) {
    throw std::invalid_argument("histogram does not match layout");
  }
  SplitMix64 rng(seed);
  const std::uint32_t h = layout.height;
  std::vector<std::vector<std::int64_t>> node_counts;
  for (std::uint32_t l = 1; l <= h; ++l) {
    node_counts.emplace_back(layout.nodes_at(l), 0);
  }
  // Users pick their level independently and uniformly, so each item count
  // splits multinomially across levels; within a level the item lands on its
  // ancestor node.
  for (std::uint64_t v = 0; v < counts.size(); ++v) {
    split_uniform(rng, counts[v], h, [&](std::uint64_t slot, std::int64_t c) {
      const auto level = static_cast<std::uint32_t>(slot + 1);
      node_counts[slot][layout.ancestor(v, level)] += c;
    });
  }

  NodeEstimates est;
  est.layout = layout;
  est.level_values.resize(h + 1);
  est.level_reports.assign(h + 1, 0);
  est.level_values[0] = {1.0};
  for (std::uint32_t l = 1; l <= h; ++l) {
    std::int64_t n_l = 0;
    for (const auto c : node_counts[l - 1]) n_l += c;
    if (n_l == 0) throw missing_level_error(l);
    est.level_reports[l] = n_l;
    const auto ones = oue_simulate_counts(node_counts[l - 1], priv, rng);
    est.level_values[l] = oue_estimate_from_counts(ones, n_l, priv).theta_hat;
  }
  return est;
}

NodeEstimates simulate_tree_per_user(std::span<const std::int64_t> counts,
                                     const TreeLayout& layout,
                                     const PrivacySpec& priv,
                                     InnerOracle oracle, std::uint64_t seed) {
  if (counts.size() != layout.domain) {
    throw std::invalid_argument("histogram does not match layout");
  }
  HhAccumulator acc(layout, oracle);
  std::uint64_t user = 0;
  for (std::uint64_t v = 0; v < counts.size(); ++v) {
    for (std::int64_t i = 0; i < counts[v]; ++i, ++user) {
      SplitMix64 rng = user_stream(seed, user);
      acc.add(hh_encode_user(v, layout, priv, oracle, rng));
    }
  }
  return hh_finalize(acc, priv);
}

HaarEstimates simulate_haar_fast(std::span<const std::int64_t> counts,
                                 const HaarLayout& layout,
                                 const PrivacySpec& priv, std::uint64_t seed) {
  if (counts.size() != layout.domain) {
    throw std::invalid_argument("histogram does not match layout");
  }
  SplitMix64 rng(seed);
  const std::uint32_t h = layout.h;
  const double p_keep = priv.e_eps / (1.0 + priv.e_eps);

  // Stage 1: multinomial split of each item count across levels, binned by
  // the item's (coefficient, sign) at that level.
  std::vector<std::vector<std::int64_t>> group(h);
  for (std::uint32_t l = 1; l <= h; ++l) {
    group[l - 1].assign(2 * layout.coeffs_at(l), 0);
  }
  for (std::uint64_t v = 0; v < counts.size(); ++v) {
    split_uniform(rng, counts[v], h, [&](std::uint64_t slot, std::int64_t c) {
      const auto level = static_cast<std::uint32_t>(slot + 1);
      const std::uint64_t k = v >> level;
      const std::uint64_t s = (v >> (level - 1)) & 1;  // 1 means negative
      group[slot][2 * k + s] += c;
    });
  }

  // Stage 2: scatter each group uniformly over the level's Hadamard indices,
  // pile by true bit sign, then draw the randomized-response flips.
  HaarAccumulator acc(layout);
  for (std::uint32_t l = 1; l <= h; ++l) {
    const std::uint64_t m = layout.coeffs_at(l);
    std::vector<std::int64_t> plus(m, 0), minus(m, 0);
    for (std::uint64_t k = 0; k < m; ++k) {
      for (std::uint64_t s = 0; s <= 1; ++s) {
        const std::int64_t c = group[l - 1][2 * k + s];
        const int sign = s ? -1 : 1;
        split_uniform(rng, c, m, [&](std::uint64_t j, std::int64_t share) {
          const int truth = sign * hadamard_entry(k, j);
          (truth > 0 ? plus : minus)[j] += share;
        });
      }
    }
    auto& tally = acc.levels[l - 1];
    for (std::uint64_t j = 0; j < m; ++j) {
      const std::int64_t kept_plus = binomial(rng, plus[j], p_keep);
      const std::int64_t kept_minus = binomial(rng, minus[j], p_keep);
      tally.bit_sums[j] =
          (2 * kept_plus - plus[j]) - (2 * kept_minus - minus[j]);
      tally.counts[j] = plus[j] + minus[j];
      tally.n += tally.counts[j];
    }
    acc.level_reports[l - 1] = tally.n;
  }
  return haar_finalize(acc, priv);
}

HaarEstimates simulate_haar_per_user(std::span<const std::int64_t> counts,
                                     const HaarLayout& layout,
                                     const PrivacySpec& priv,
                                     std::uint64_t seed) {
  if (counts.size() != layout.domain) {
    throw std::invalid_argument("histogram does not match layout");
  }
  HaarAccumulator acc(layout);
  std::uint64_t user = 0;
  for (std::uint64_t v = 0; v < counts.size(); ++v) {
    for (std::int64_t i = 0; i < counts[v]; ++i, ++user) {
      SplitMix64 rng = user_stream(seed, user);
      acc.add(haar_encode_user(v, layout, priv, rng));
    }
  }
  return haar_finalize(acc, priv);
}

// --- Experiments -------------------------------------------------------------------------

namespace {

struct CellAccumulator {
  std::vector<double> len_mean, len_m2;
  double overall_mean = 0.0, overall_m2 = 0.0;
  double abs_mean = 0.0, abs_m2 = 0.0;
  double wall_ms = 0.0;
  int reps = 0;

  explicit CellAccumulator(std::uint64_t d)
      : len_mean(d + 1, 0.0), len_m2(d + 1, 0.0) {}

  static void welford(double x, double& mean, double& m2, int n) {
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }

  void add_rep(std::span<const double> len_mse, double overall, double abs) {
    ++reps;
    for (std::size_t r = 1; r < len_mean.size(); ++r) {
      welford(len_mse[r], len_mean[r], len_m2[r], reps);
    }
    welford(overall, overall_mean, overall_m2, reps);
    welford(abs, abs_mean, abs_m2, reps);
  }

  static double stddev(double m2, int n) {
    return n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0;
  }
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.methods.empty()) {
    throw std::invalid_argument("no methods requested");
  }
  if (config.d < 2 || config.d > (1ULL << 22)) {
    throw capacity_error("experiments support 2 <= d <= 2^22");
  }
  if (config.n <= 0) throw std::domain_error("population must be positive");
  if (config.reps < 1) throw std::domain_error("need at least one repetition");
  const PrivacySpec priv(config.epsilon);
  const QuerySet queries = build_query_set(config.d, config.stride);

  std::vector<CellAccumulator> cells(config.methods.size(),
                                     CellAccumulator(config.d));
  std::vector<std::uint64_t> queries_per_length(config.d + 1, 0);
  queries.for_each([&](std::uint64_t a, std::uint64_t b) {
    ++queries_per_length[b - a + 1];
  });

  for (int rep = 0; rep < config.reps; ++rep) {
    SplitMix64 data_rng = substream(config.seed, kTagData, rep);
    const DataSpec data_spec{config.d, config.n, config.p, config.height};
    const auto counts = sample_cauchy(data_spec, data_rng);
    std::vector<double> true_prefix(config.d + 1, 0.0);
    for (std::uint64_t v = 0; v < config.d; ++v) {
      true_prefix[v + 1] = true_prefix[v] + static_cast<double>(counts[v]);
    }
    const double inv_n = 1.0 / static_cast<double>(config.n);

    // hh:B and hh_c:B share one set of raw node estimates per repetition.
    std::map<std::uint32_t, NodeEstimates> raw_trees;
    const auto tree_for = [&](std::uint32_t b) -> const NodeEstimates& {
      auto it = raw_trees.find(b);
      if (it == raw_trees.end()) {
        const auto layout = TreeLayout::for_domain(config.d, b);
        it = raw_trees
                 .emplace(b, simulate_tree_oue_fast(
                                 counts, layout, priv,
                                 derive_seed(config.seed, kTagTree, rep, b)))
                 .first;
      }
      return it->second;
    };

    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const MethodSpec& method = config.methods[mi];
      const auto started = std::chrono::steady_clock::now();
      Estimator est = [&] {
        switch (method.kind) {
          case EstimatorKind::kFlat:
            return Estimator::flat(
                simulate_flat_oue(counts, priv,
                                  derive_seed(config.seed, kTagFlat, rep),
                                  config.use_fast_paths),
                config.d);
          case EstimatorKind::kTree:
            return Estimator::tree(tree_for(method.b));
          case EstimatorKind::kConsistentTree:
            return Estimator::consistent_tree(enforce(tree_for(method.b)));
          case EstimatorKind::kHaar: {
            const auto layout = HaarLayout::for_domain(config.d);
            const std::uint64_t seed =
                derive_seed(config.seed, kTagHaar, rep);
            return Estimator::haar(
                config.use_fast_paths
                    ? simulate_haar_fast(counts, layout, priv, seed)
                    : simulate_haar_per_user(counts, layout, priv, seed));
          }
        }
        throw std::logic_error("unknown method kind");
      }();

      std::vector<double> sq_by_length(config.d + 1, 0.0);
      double sq_total = 0.0, abs_total = 0.0;
      queries.for_each([&](std::uint64_t a, std::uint64_t b) {
        const double truth = (true_prefix[b + 1] - true_prefix[a]) * inv_n;
        const double err = est.answer_range(RangeQuery{a, b}) - truth;
        sq_by_length[b - a + 1] += err * err;
        sq_total += err * err;
        abs_total += std::abs(err);
      });
      for (std::uint64_t r = 1; r <= config.d; ++r) {
        if (queries_per_length[r] > 0) {
          sq_by_length[r] /= static_cast<double>(queries_per_length[r]);
        }
      }
      const double q = static_cast<double>(queries.count());
      cells[mi].add_rep(sq_by_length, sq_total / q, abs_total / q);
      cells[mi].wall_ms +=
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - started)
              .count();
    }
  }

  ExperimentResult result;
  result.config = config;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    MethodCells out;
    out.method = method_name(config.methods[mi]);
    out.mse_by_length.assign(config.d + 1, 0.0);
    out.mse_std_by_length.assign(config.d + 1, 0.0);
    for (std::uint64_t r = 1; r <= config.d; ++r) {
      if (queries_per_length[r] == 0) continue;
      out.mse_by_length[r] = cells[mi].len_mean[r];
      out.mse_std_by_length[r] =
          CellAccumulator::stddev(cells[mi].len_m2[r], cells[mi].reps);
    }
    out.overall_mse = cells[mi].overall_mean;
    out.overall_mse_std =
        CellAccumulator::stddev(cells[mi].overall_m2, cells[mi].reps);
    out.overall_mae = cells[mi].abs_mean;
    out.overall_mae_std =
        CellAccumulator::stddev(cells[mi].abs_m2, cells[mi].reps);
    out.wall_ms = cells[mi].wall_ms;
    result.methods.push_back(std::move(out));
  }
  return result;
}

// --- Predictors ------------------------------------------------------------------------------

std::vector<PredictorRow> predictor_table(std::uint64_t d, std::uint32_t b,
                                          const PrivacySpec& priv,
                                          std::int64_t n,
                                          std::span<const std::uint64_t> rs) {
  const auto layout = TreeLayout::for_domain(d, b);
  const std::uint64_t padded = std::bit_ceil(d);
  std::vector<PredictorRow> rows;
  rows.reserve(rs.size());
  for (const auto r : rs) {
    PredictorRow row;
    row.r = r;
    row.flat = flat_range_variance(r, priv, n);
    row.hh = hh_variance_bound(layout, r, priv, n);
    row.hh_c = post_ci_variance_bound(b, r, d, priv, n);
    row.haar = haar_variance_bound(padded, priv, n);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ldpr
