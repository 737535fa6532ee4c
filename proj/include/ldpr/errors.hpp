#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ldpr {

// Raised when a request exceeds a documented size/feasibility limit.
class capacity_error : public std::runtime_error {
 public:
  explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a hierarchical aggregation received no reports for some level.
class missing_level_error : public std::runtime_error {
 public:
  explicit missing_level_error(std::uint32_t level)
      : std::runtime_error("no reports for tree level " +
                           std::to_string(level)),
        level_(level) {}
  std::uint32_t level() const { return level_; }

 private:
  std::uint32_t level_;
};

// Raised when an estimate is too degenerate to post-process (e.g. a quantile
// search over an estimated distribution with non-positive total mass).
class degenerate_estimate_error : public std::runtime_error {
 public:
  explicit degenerate_estimate_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace ldpr
