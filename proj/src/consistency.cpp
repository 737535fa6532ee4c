#include "ldpr/consistency.hpp"

#include <cmath>
#include <stdexcept>

#include "ldpr/errors.hpp"

namespace ldpr {

namespace {

void require_shape(const NodeEstimates& est) {
  if (est.level_values.size() != est.layout.height + 1) {
    throw std::invalid_argument("estimate levels do not match layout");
  }
  for (std::uint32_t l = 0; l <= est.layout.height; ++l) {
    if (est.level_values[l].size() != est.layout.nodes_at(l)) {
      throw std::invalid_argument("estimate width does not match layout");
    }
  }
}

}  // namespace

NodeEstimates weighted_average(const NodeEstimates& est) {
  require_shape(est);
  const TreeLayout& layout = est.layout;
  const double b = layout.b;
  NodeEstimates out = est;
  // Leaves (subtree of i = 1 level) keep their raw values; walk upward.
  for (std::uint32_t level = layout.height; level-- > 0;) {
    const std::uint32_t i = layout.height - level + 1;  // levels in subtree
    const double bi = std::pow(b, static_cast<double>(i));
    const double bi1 = std::pow(b, static_cast<double>(i - 1));
    const double w_self = (bi - bi1) / (bi - 1.0);
    const double w_children = (bi1 - 1.0) / (bi - 1.0);
    auto& row = out.level_values[level];
    const auto& children = out.level_values[level + 1];
    for (std::uint64_t v = 0; v < row.size(); ++v) {
      double child_sum = 0.0;
      for (std::uint32_t c = 0; c < layout.b; ++c) {
        child_sum += children[v * layout.b + c];
      }
      row[v] = w_self * est.level_values[level][v] + w_children * child_sum;
    }
  }
  return out;
}

ConsistentEstimates mean_consistency(const NodeEstimates& averaged) {
  require_shape(averaged);
  const TreeLayout& layout = averaged.layout;
  ConsistentEstimates out;
  out.layout = layout;
  out.level_values = averaged.level_values;
  // The root keeps its averaged value; every sibling group below is shifted
  // so that it sums exactly to the parent's final value.
  for (std::uint32_t level = 1; level <= layout.height; ++level) {
    const auto& avg = averaged.level_values[level];
    auto& row = out.level_values[level];
    const auto& parents = out.level_values[level - 1];
    for (std::uint64_t p = 0; p < parents.size(); ++p) {
      double group_sum = 0.0;
      for (std::uint32_t c = 0; c < layout.b; ++c) {
        group_sum += avg[p * layout.b + c];
      }
      const double shift = (parents[p] - group_sum) / layout.b;
      for (std::uint32_t c = 0; c < layout.b; ++c) {
        row[p * layout.b + c] = avg[p * layout.b + c] + shift;
      }
    }
  }
  return out;
}

ConsistentEstimates enforce(const NodeEstimates& est) {
  return mean_consistency(weighted_average(est));
}

ConsistentEstimates least_squares_oracle(const NodeEstimates& est) {
  require_shape(est);
  const TreeLayout& layout = est.layout;
  const std::uint64_t leaves = layout.leaves;
  if (leaves > 1024) {
    throw capacity_error("dense least-squares check supports <= 1024 leaves");
  }

  // Normal equations A c = rhs for the stacked leaf-indicator system.
  // A[u][v] counts the tree nodes whose subtree contains both leaves u and v,
  // i.e. the depth of their lowest common ancestor; build it implicitly by
  // accumulating over nodes.
  std::vector<std::vector<double>> a(leaves, std::vector<double>(leaves, 0.0));
  std::vector<double> rhs(leaves, 0.0);
  for (std::uint32_t level = 0; level <= layout.height; ++level) {
    const std::uint64_t span = layout.subtree_leaves(level);
    for (std::uint64_t v = 0; v < layout.nodes_at(level); ++v) {
      const std::uint64_t lo = v * span;
      for (std::uint64_t u = lo; u < lo + span; ++u) {
        rhs[u] += est.level_values[level][v];
        for (std::uint64_t w = lo; w < lo + span; ++w) a[u][w] += 1.0;
      }
    }
  }

  // Cholesky solve; A is symmetric positive definite (the leaf rows alone
  // contribute the identity).
  std::vector<std::vector<double>> chol(leaves, std::vector<double>(leaves));
  for (std::uint64_t i = 0; i < leaves; ++i) {
    for (std::uint64_t j = 0; j <= i; ++j) {
      double sum = a[i][j];
      for (std::uint64_t k = 0; k < j; ++k) sum -= chol[i][k] * chol[j][k];
      if (i == j) {
        if (sum <= 0.0) throw std::runtime_error("normal matrix not SPD");
        chol[i][j] = std::sqrt(sum);
      } else {
        chol[i][j] = sum / chol[j][j];
      }
    }
  }
  std::vector<double> y(leaves), c(leaves);
  for (std::uint64_t i = 0; i < leaves; ++i) {
    double sum = rhs[i];
    for (std::uint64_t k = 0; k < i; ++k) sum -= chol[i][k] * y[k];
    y[i] = sum / chol[i][i];
  }
  for (std::uint64_t i = leaves; i-- > 0;) {
    double sum = y[i];
    for (std::uint64_t k = i + 1; k < leaves; ++k) sum -= chol[k][i] * c[k];
    c[i] = sum / chol[i][i];
  }

  ConsistentEstimates out;
  out.layout = layout;
  out.level_values.resize(layout.height + 1);
  out.level_values[layout.height] = c;
  for (std::uint32_t level = layout.height; level-- > 0;) {
    auto& row = out.level_values[level];
    row.assign(layout.nodes_at(level), 0.0);
    const auto& children = out.level_values[level + 1];
    for (std::uint64_t v = 0; v < row.size(); ++v) {
      for (std::uint32_t ch = 0; ch < layout.b; ++ch) {
        row[v] += children[v * layout.b + ch];
      }
    }
  }
  return out;
}

double hh_answer_range(const ConsistentEstimates& est, std::uint64_t a,
                       std::uint64_t b) {
  double total = 0.0;
  for (const auto& block : b_adic_decompose(a, b, est.layout)) {
    total += est.value(block.level, block.index);
  }
  return total;
}

double post_ci_variance_bound(std::uint32_t b, std::uint64_t r,
                              std::uint64_t d, const PrivacySpec& priv,
                              std::int64_t n) {
  if (b < 2 || r == 0 || r > d) throw std::domain_error("bad range length");
  const double vf = variance_formula(Mechanism::kOue, priv, n);
  const double log_b = std::log(static_cast<double>(b));
  const double log_r = std::log(static_cast<double>(r)) / log_b;
  const double log_d = std::log(static_cast<double>(d)) / log_b;
  return (b + 1.0) * vf * log_r * log_d / 2.0;
}

double optimal_branching_post_ci() {
  // d/db [(b + 1) / (2 ln^2 b)] = 0  <=>  b ln b - 2b - 2 = 0.
  double lo = 2.0, hi = 32.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f = mid * std::log(mid) - 2.0 * mid - 2.0;
    (f < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ldpr
