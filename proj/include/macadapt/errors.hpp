#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace macadapt {

/// Raised when an argument violates an operation's contract.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a tuning parameter (rho, base rates, budgets) is outside its
/// admissible set.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A per-level rate choice that breaks one of the flexible-allocation
/// constraints. Carries the level and the offending user subset (0-based).
class ConstraintViolation : public std::runtime_error {
 public:
  ConstraintViolation(const std::string& what, std::size_t level, std::vector<std::size_t> subset,
                      double excess)
      : std::runtime_error(what), level_(level), subset_(std::move(subset)), excess_(excess) {}

  std::size_t level() const noexcept { return level_; }
  const std::vector<std::size_t>& subset() const noexcept { return subset_; }
  double excess() const noexcept { return excess_; }

 private:
  std::size_t level_;
  std::vector<std::size_t> subset_;
  double excess_;
};

/// Raised by solvers that cannot produce an answer (size caps, LP failure).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace macadapt
