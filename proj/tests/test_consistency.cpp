#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ldpr/consistency.hpp"
#include "ldpr/errors.hpp"
#include "support.hpp"

using namespace ldpr;
namespace tst = ldpr::testing;

namespace {

NodeEstimates random_estimates(const TreeLayout& layout, SplitMix64& rng) {
  NodeEstimates est;
  est.layout = layout;
  est.level_values.resize(layout.height + 1);
  est.level_reports.assign(layout.height + 1, 1000);
  est.level_values[0] = {1.0};
  for (std::uint32_t l = 1; l <= layout.height; ++l) {
    est.level_values[l].resize(layout.nodes_at(l));
    for (auto& v : est.level_values[l]) v = rng.uniform() * 1.5 - 0.25;
  }
  return est;
}

NodeEstimates noiseless_estimates(std::span<const std::int64_t> counts,
                                  const TreeLayout& layout) {
  std::int64_t n = 0;
  for (const auto c : counts) n += c;
  NodeEstimates est;
  est.layout = layout;
  est.level_values.resize(layout.height + 1);
  est.level_reports.assign(layout.height + 1, n);
  est.level_values[0] = {1.0};
  for (std::uint32_t l = 1; l <= layout.height; ++l) {
    est.level_values[l].assign(layout.nodes_at(l), 0.0);
    for (std::uint64_t v = 0; v < counts.size(); ++v) {
      est.level_values[l][layout.ancestor(v, l)] +=
          static_cast<double>(counts[v]) / static_cast<double>(n);
    }
  }
  return est;
}

double max_abs_diff(const ConsistentEstimates& a, const ConsistentEstimates& b) {
  double worst = 0.0;
  for (std::uint32_t l = 0; l <= a.layout.height; ++l) {
    for (std::uint64_t v = 0; v < a.level_values[l].size(); ++v) {
      worst = std::max(worst,
                       std::abs(a.level_values[l][v] - b.level_values[l][v]));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("two-stage enforcement equals the dense least-squares projection") {
  SplitMix64 rng(2024);
  const std::vector<std::pair<std::uint64_t, std::uint32_t>> shapes = {
      {16, 2}, {16, 4}, {81, 3}};
  for (const auto& [d, b] : shapes) {
    const auto layout = TreeLayout::for_domain(d, b);
    for (int rep = 0; rep < 30; ++rep) {
      const auto est = random_estimates(layout, rng);
      const auto fast = enforce(est);
      const auto exact = least_squares_oracle(est);
      CHECK(max_abs_diff(fast, exact) < 1e-9);
    }
  }
  // One large instance against the dense solver.
  const auto big = TreeLayout::for_domain(256, 4);
  for (int rep = 0; rep < 3; ++rep) {
    const auto est = random_estimates(big, rng);
    CHECK(max_abs_diff(enforce(est), least_squares_oracle(est)) < 1e-9);
  }
}

TEST_CASE("every parent equals the sum of its children after enforcement") {
  SplitMix64 rng(99);
  for (const std::uint32_t b : {2u, 3u, 4u}) {
    const auto layout = TreeLayout::for_domain(64, b);
    for (int rep = 0; rep < 20; ++rep) {
      const auto fixed = enforce(random_estimates(layout, rng));
      for (std::uint32_t l = 0; l < layout.height; ++l) {
        for (std::uint64_t v = 0; v < layout.nodes_at(l); ++v) {
          double child_sum = 0.0;
          for (std::uint32_t c = 0; c < b; ++c) {
            child_sum += fixed.value(l + 1, v * b + c);
          }
          REQUIRE(std::abs(fixed.value(l, v) - child_sum) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("already-consistent trees are fixed points") {
  const auto layout = TreeLayout::for_domain(32, 2);
  std::vector<std::int64_t> counts(32);
  SplitMix64 rng(5);
  for (auto& c : counts) c = 1 + static_cast<std::int64_t>(rng.below(9));
  const auto exact = noiseless_estimates(counts, layout);
  const auto fixed = enforce(exact);
  for (std::uint32_t l = 0; l <= layout.height; ++l) {
    for (std::uint64_t v = 0; v < layout.nodes_at(l); ++v) {
      CHECK(fixed.value(l, v) ==
            doctest::Approx(exact.value(l, v)).epsilon(1e-12));
    }
  }
}

TEST_CASE("enforcement is idempotent") {
  const auto layout = TreeLayout::for_domain(64, 4);
  SplitMix64 rng(12);
  const auto once = enforce(random_estimates(layout, rng));
  NodeEstimates again;
  again.layout = once.layout;
  again.level_values = once.level_values;
  again.level_reports.assign(layout.height + 1, 1000);
  const auto twice = enforce(again);
  CHECK(max_abs_diff(once, twice) < 1e-12);
}

TEST_CASE("after enforcement any decomposition of a range agrees") {
  const auto layout = TreeLayout::for_domain(64, 2);
  SplitMix64 rng(31);
  const auto fixed = enforce(random_estimates(layout, rng));
  for (std::uint64_t a = 0; a < 64; a += 7) {
    for (std::uint64_t b = a; b < 64; b += 5) {
      double leaf_sum = 0.0;
      for (std::uint64_t v = a; v <= b; ++v) {
        leaf_sum += fixed.value(layout.height, v);
      }
      CHECK(std::abs(hh_answer_range(fixed, a, b) - leaf_sum) < 1e-9);
    }
  }
}

TEST_CASE("single-level variance reduction matches the affine analysis") {
  // For height 1 the final leaf is f_z + (1 - sum f) / (b + 1), so the
  // variance ratio against the raw leaf is exactly (b^2 + b - 1) / (b + 1)^2.
  const PrivacySpec priv(std::log(3.0));
  const std::int64_t n = 20000;
  const int reps = 600;
  for (const std::uint32_t b : {4u, 8u}) {
    const auto layout = TreeLayout::for_domain(b, b);  // height 1
    std::vector<std::int64_t> counts(b, n / b);
    std::vector<double> raw_samples, ci_samples;
    for (int rep = 0; rep < reps; ++rep) {
      SplitMix64 rng(derive_seed(600 + b, rep));
      const auto ones = oue_simulate_counts(counts, priv, rng);
      NodeEstimates est;
      est.layout = layout;
      est.level_values = {{1.0},
                          oue_estimate_from_counts(ones, n, priv).theta_hat};
      est.level_reports = {0, n};
      const auto fixed = enforce(est);
      for (std::uint64_t z = 0; z < b; ++z) {
        raw_samples.push_back(est.value(1, z));
        ci_samples.push_back(fixed.value(1, z));
      }
    }
    const double ratio =
        tst::variance_of(ci_samples) / tst::variance_of(raw_samples);
    const double predicted =
        (static_cast<double>(b) * b + b - 1.0) / ((b + 1.0) * (b + 1.0));
    CHECK(std::abs(ratio - predicted) < 0.08);
    CHECK(ratio < 1.0);
  }
}

TEST_CASE("the dense oracle refuses oversized trees") {
  const auto layout = TreeLayout::for_domain(2048, 2);
  NodeEstimates est;
  est.layout = layout;
  est.level_values.resize(layout.height + 1);
  est.level_values[0] = {1.0};
  for (std::uint32_t l = 1; l <= layout.height; ++l) {
    est.level_values[l].assign(layout.nodes_at(l), 0.0);
  }
  est.level_reports.assign(layout.height + 1, 1);
  CHECK_THROWS_AS(least_squares_oracle(est), capacity_error);
}

TEST_CASE("post-enforcement predictors freeze their formulas") {
  const PrivacySpec priv(std::log(3.0));
  const std::int64_t n = 1000000;
  const double vf = 3e-6;
  // (b + 1) * vf * log_b(r) * log_b(d) / 2 at b=4, r=16, d=256.
  CHECK(post_ci_variance_bound(4, 16, 256, priv, n) ==
        doctest::Approx(5.0 * vf * 2.0 * 4.0 / 2.0).epsilon(1e-9));
  CHECK(post_ci_variance_bound(4, 1, 256, priv, n) == doctest::Approx(0.0));
  CHECK_THROWS_AS(post_ci_variance_bound(4, 0, 256, priv, n),
                  std::domain_error);
  CHECK_THROWS_AS(post_ci_variance_bound(4, 300, 256, priv, n),
                  std::domain_error);

  const double b = optimal_branching_post_ci();
  CHECK(b == doctest::Approx(9.18).epsilon(1e-2));
  CHECK(b * std::log(b) - 2.0 * b - 2.0 ==
        doctest::Approx(0.0).epsilon(1e-6));
  // Enforcement moves the optimal branching upward.
  CHECK(optimal_branching_post_ci() > optimal_branching_pre_ci());
}

TEST_CASE("shape mismatches are rejected") {
  const auto layout = TreeLayout::for_domain(16, 2);
  NodeEstimates est;
  est.layout = layout;
  est.level_values.resize(layout.height);  // one level short
  CHECK_THROWS_AS(enforce(est), std::invalid_argument);
}
