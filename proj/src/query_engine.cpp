#include "ldpr/query_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ldpr/errors.hpp"

namespace ldpr {

Estimator Estimator::flat(FrequencyEstimate est, std::uint64_t domain) {
  if (domain == 0 || domain > est.theta_hat.size()) {
    throw std::invalid_argument("domain does not match estimate width");
  }
  Estimator e;
  e.kind_ = EstimatorKind::kFlat;
  e.domain_ = domain;
  e.flat_prefix_.resize(domain);
  double running = 0.0;
  for (std::uint64_t z = 0; z < domain; ++z) {
    running += est.theta_hat[z];
    e.flat_prefix_[z] = running;
  }
  return e;
}

Estimator Estimator::tree(NodeEstimates est) {
  Estimator e;
  e.kind_ = EstimatorKind::kTree;
  e.domain_ = est.layout.domain;
  e.backend_ = std::move(est);
  return e;
}

Estimator Estimator::consistent_tree(ConsistentEstimates est) {
  Estimator e;
  e.kind_ = EstimatorKind::kConsistentTree;
  e.domain_ = est.layout.domain;
  e.backend_ = std::move(est);
  return e;
}

Estimator Estimator::haar(HaarEstimates est) {
  Estimator e;
  e.kind_ = EstimatorKind::kHaar;
  e.domain_ = est.layout.domain;
  e.backend_ = std::move(est);
  return e;
}

double Estimator::answer_range(const RangeQuery& q) const {
  if (q.a > q.b || q.b >= domain_) {
    throw std::domain_error("range outside domain");
  }
  switch (kind_) {
    case EstimatorKind::kFlat:
      return flat_prefix_[q.b] - (q.a == 0 ? 0.0 : flat_prefix_[q.a - 1]);
    case EstimatorKind::kTree:
      return hh_answer_range(std::get<NodeEstimates>(backend_), q.a, q.b);
    case EstimatorKind::kConsistentTree:
      return hh_answer_range(std::get<ConsistentEstimates>(backend_), q.a,
                             q.b);
    case EstimatorKind::kHaar:
      return haar_answer_range(std::get<HaarEstimates>(backend_), q.a, q.b);
  }
  throw std::logic_error("unknown estimator kind");
}

double Estimator::answer_prefix(std::uint64_t b) const {
  return answer_range(RangeQuery{0, b});
}

double Estimator::total_mass() const { return answer_prefix(domain_ - 1); }

// --- Quantiles ----------------------------------------------------------------

PrefixCdf::PrefixCdf(const Estimator& est) {
  const std::uint64_t d = est.domain();
  iso_.resize(d);
  double running_max = -std::numeric_limits<double>::infinity();
  for (std::uint64_t b = 0; b < d; ++b) {
    running_max = std::max(running_max, est.answer_prefix(b));
    iso_[b] = running_max;
  }
  total_ = est.total_mass();
}

std::uint64_t PrefixCdf::index_for(double phi) const {
  if (!(phi >= 0.0 && phi <= 1.0)) {
    throw std::domain_error("quantile level must lie in [0, 1]");
  }
  if (!(total_ > 0.0)) {
    throw degenerate_estimate_error(
        "estimated total mass is not positive; quantiles undefined");
  }
  const double threshold = phi * total_;
  // iso_ is monotone and ends at max(prefixes) >= total_, so the search
  // always lands inside the domain.
  const auto it = std::lower_bound(iso_.begin(), iso_.end(), threshold);
  if (it == iso_.end()) return iso_.size() - 1;
  return static_cast<std::uint64_t>(it - iso_.begin());
}

std::uint64_t quantile_index(const Estimator& est, double phi) {
  return PrefixCdf(est).index_for(phi);
}

std::uint64_t true_quantile(std::span<const std::int64_t> counts, double phi) {
  if (counts.empty()) throw std::invalid_argument("empty histogram");
  std::int64_t total = 0;
  for (const auto c : counts) total += c;
  if (total <= 0) throw std::invalid_argument("histogram has no mass");
  const double threshold = phi * static_cast<double>(total);
  double running = 0.0;
  for (std::size_t v = 0; v < counts.size(); ++v) {
    running += static_cast<double>(counts[v]);
    if (running >= threshold) return v;
  }
  return counts.size() - 1;
}

QuantileResult quantile(const Estimator& est, double phi,
                        std::span<const std::int64_t> true_counts) {
  if (true_counts.size() != est.domain()) {
    throw std::invalid_argument("true histogram does not match domain");
  }
  QuantileResult result;
  result.phi = phi;
  result.index = quantile_index(est, phi);

  const std::uint64_t truth = true_quantile(true_counts, phi);
  const double gap = static_cast<double>(result.index) -
                     static_cast<double>(truth);
  result.value_error = gap * gap;

  std::int64_t total = 0, running = 0;
  for (const auto c : true_counts) total += c;
  for (std::uint64_t v = 0; v <= result.index; ++v) running += true_counts[v];
  const double level =
      static_cast<double>(running) / static_cast<double>(total);
  result.quantile_error = std::abs(phi - level);
  return result;
}

}  // namespace ldpr
