#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ldpr/errors.hpp"
#include "ldpr/harness.hpp"
#include "ldpr/query_engine.hpp"
#include "support.hpp"

using namespace ldpr;

namespace {

// Exact flat estimate (no noise) from a histogram.
Estimator exact_flat(std::span<const std::int64_t> counts) {
  std::int64_t n = 0;
  for (const auto c : counts) n += c;
  FrequencyEstimate est;
  est.n_reports = n;
  est.theta_hat.reserve(counts.size());
  for (const auto c : counts) {
    est.theta_hat.push_back(static_cast<double>(c) / static_cast<double>(n));
  }
  return Estimator::flat(std::move(est), counts.size());
}

}  // namespace

TEST_CASE("flat backend answers ranges and prefixes exactly") {
  const std::vector<std::int64_t> counts = {4, 0, 3, 1, 0, 0, 2, 6};
  const auto est = exact_flat(counts);
  CHECK(est.kind() == EstimatorKind::kFlat);
  CHECK(est.domain() == 8);
  CHECK(est.answer_range({0, 7}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.answer_range({2, 3}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(est.answer_prefix(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(est.answer_prefix(6) == doctest::Approx(10.0 / 16).epsilon(1e-12));
  CHECK(est.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(est.answer_range({3, 2}), std::domain_error);
  CHECK_THROWS_AS(est.answer_range({0, 8}), std::domain_error);
  CHECK_THROWS_AS(est.answer_prefix(8), std::domain_error);
}

TEST_CASE("all backends agree that a prefix is a range from zero") {
  const std::uint64_t d = 64;
  const PrivacySpec priv(1.1);
  std::vector<std::int64_t> counts(d);
  SplitMix64 data_rng(15);
  // Enough mass that even the flat oracle's total (64 noisy cells) is stable.
  for (auto& c : counts) {
    c = 200 + static_cast<std::int64_t>(data_rng.below(300));
  }

  const auto layout = TreeLayout::for_domain(d, 4);
  const auto raw = simulate_tree_oue_fast(counts, layout, priv, 44);
  const auto hlayout = HaarLayout::for_domain(d);
  const auto haar = simulate_haar_fast(counts, hlayout, priv, 45);

  const std::vector<Estimator> backends = {
      Estimator::flat(simulate_flat_oue(counts, priv, 43, true), d),
      Estimator::tree(raw),
      Estimator::consistent_tree(enforce(raw)),
      Estimator::haar(haar),
  };
  for (const auto& est : backends) {
    CHECK(est.domain() == d);
    for (std::uint64_t b = 0; b < d; b += 5) {
      CHECK(est.answer_prefix(b) ==
            doctest::Approx(est.answer_range({0, b})).epsilon(1e-12));
    }
    // Estimates are noisy but the total stays near one.
    CHECK(est.total_mass() == doctest::Approx(1.0).epsilon(0.2));
  }
}

TEST_CASE("true quantiles freeze on a hand-checked histogram") {
  const std::vector<std::int64_t> counts = {1, 1, 1, 1};
  CHECK(true_quantile(counts, 0.0) == 0);
  CHECK(true_quantile(counts, 0.25) == 0);
  CHECK(true_quantile(counts, 0.26) == 1);
  CHECK(true_quantile(counts, 0.5) == 1);
  CHECK(true_quantile(counts, 0.75) == 2);
  CHECK(true_quantile(counts, 1.0) == 3);
  const std::vector<std::int64_t> skew = {0, 10, 0, 0, 90};
  CHECK(true_quantile(skew, 0.05) == 1);
  CHECK(true_quantile(skew, 0.1) == 1);
  CHECK(true_quantile(skew, 0.11) == 4);
}

TEST_CASE("quantile search over an exact estimator returns the truth") {
  std::vector<std::int64_t> counts(100);
  SplitMix64 rng(9);
  for (auto& c : counts) c = static_cast<std::int64_t>(rng.below(20));
  counts[50] += 100;
  const auto est = exact_flat(counts);
  for (int i = 1; i <= 9; ++i) {
    const double phi = i / 10.0;
    const auto res = quantile(est, phi, counts);
    CHECK(res.phi == phi);
    CHECK(res.index == true_quantile(counts, phi));
    CHECK(res.value_error == 0.0);
    // The only residual error is the CDF's discrete jump at the true index.
    std::int64_t n = 0, cum = 0;
    for (const auto c : counts) n += c;
    for (std::uint64_t v = 0; v <= res.index; ++v) cum += counts[v];
    CHECK(res.quantile_error ==
          doctest::Approx(std::abs(phi - static_cast<double>(cum) / n))
              .epsilon(1e-12));
  }
}

TEST_CASE("the isotonic pass repairs a non-monotone noisy prefix") {
  // A deliberately dented estimate: mass 0.5 at cell 1, a -0.3 dip at cell 2.
  FrequencyEstimate est;
  est.n_reports = 100;
  est.theta_hat = {0.1, 0.5, -0.3, 0.2, 0.5};
  const auto flat = Estimator::flat(std::move(est), 5);
  const PrefixCdf cdf(flat);
  CHECK(cdf.total() == doctest::Approx(1.0).epsilon(1e-12));
  // Raw prefixes are 0.1, 0.6, 0.3, 0.5, 1.0 -> isotonic 0.1, 0.6, 0.6, 0.6, 1.
  CHECK(cdf.index_for(0.05) == 0);
  CHECK(cdf.index_for(0.35) == 1);   // reaches 0.6 at cell 1
  CHECK(cdf.index_for(0.60) == 1);
  CHECK(cdf.index_for(0.61) == 4);   // the dip region never qualifies
  CHECK(cdf.index_for(1.0) == 4);
  CHECK_THROWS_AS(cdf.index_for(-0.1), std::domain_error);
  CHECK_THROWS_AS(cdf.index_for(1.1), std::domain_error);
}

TEST_CASE("degenerate totals are refused") {
  FrequencyEstimate est;
  est.n_reports = 10;
  est.theta_hat = {-0.2, 0.1, 0.0};
  const auto flat = Estimator::flat(std::move(est), 3);
  const PrefixCdf cdf(flat);
  CHECK(cdf.total() <= 0.0);
  CHECK_THROWS_AS(cdf.index_for(0.5), degenerate_estimate_error);
  CHECK_THROWS_AS(quantile_index(flat, 0.5), degenerate_estimate_error);
}

TEST_CASE("quantile indices are monotone in the level") {
  const std::uint64_t d = 256;
  const PrivacySpec priv(1.1);
  SplitMix64 rng(21);
  const auto counts = sample_cauchy(DataSpec{d, 200000, 0.4, -1.0}, rng);
  const auto layout = TreeLayout::for_domain(d, 4);
  const auto est =
      Estimator::consistent_tree(enforce(simulate_tree_oue_fast(
          counts, layout, priv, 77)));
  std::uint64_t prev = 0;
  for (int i = 1; i <= 19; ++i) {
    const std::uint64_t idx = quantile_index(est, i / 20.0);
    CHECK(idx >= prev);
    prev = idx;
  }
}

TEST_CASE("noisy quantiles stay near the truth at moderate scale") {
  const std::uint64_t d = 1024;
  const std::int64_t n = 1 << 20;
  const PrivacySpec priv(1.1);
  SplitMix64 rng(33);
  const auto counts = sample_cauchy(DataSpec{d, n, 0.4, -1.0}, rng);

  const auto layout = TreeLayout::for_domain(d, 4);
  const auto tree_est = Estimator::consistent_tree(
      enforce(simulate_tree_oue_fast(counts, layout, priv, 55)));
  const auto hlayout = HaarLayout::for_domain(d);
  const auto haar_est =
      Estimator::haar(simulate_haar_fast(counts, hlayout, priv, 56));

  for (const auto& est : {tree_est, haar_est}) {
    for (int i = 1; i <= 9; ++i) {
      const auto res = quantile(est, i / 10.0, counts);
      CHECK(res.quantile_error < 0.05);
    }
  }
}
