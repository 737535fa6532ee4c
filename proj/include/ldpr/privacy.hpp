#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ldpr {

// Privacy budget for one randomized report.
struct PrivacySpec {
  double epsilon;
  double e_eps;  // exp(epsilon), cached because every mechanism needs it

  explicit PrivacySpec(double eps) : epsilon(eps), e_eps(std::exp(eps)) {
    if (!(eps > 0.0) || !std::isfinite(eps) || !std::isfinite(e_eps)) {
      throw std::domain_error("epsilon must be positive and finite");
    }
  }
};

// Item domain [0, d).  Transform-based mechanisms work on the power-of-two
// padding; padded tail items carry zero true mass and stay out of queries.
struct DomainSpec {
  std::uint64_t d;
  std::uint64_t padded_d;

  explicit DomainSpec(std::uint64_t size)
      : d(size), padded_d(std::bit_ceil(size)) {
    if (size == 0) throw std::domain_error("domain must be non-empty");
    if (size > (1ULL << 62)) throw std::domain_error("domain too large");
  }
};

}  // namespace ldpr
