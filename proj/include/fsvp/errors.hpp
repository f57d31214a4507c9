#pragma once

#include <stdexcept>
#include <string>

namespace fsvp {

/// Input outside the mathematical domain of an operation
/// (non-positive determinant, singular matrix, non-SPD argument).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The time increment is too large for the local algorithm
/// (xi above the cap, exponential argument too large, Neumann series invalid).
/// The caller should reduce dt.
class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver did not reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Failure inside a loading scenario, tagged with the time at which it happened.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& what, double t, bool step_size)
      : std::runtime_error(what), t_(t), step_size_(step_size) {}

  double time() const noexcept { return t_; }
  /// True when the root cause was a StepSizeError.
  bool step_size() const noexcept { return step_size_; }

 private:
  double t_;
  bool step_size_;
};

}  // namespace fsvp
