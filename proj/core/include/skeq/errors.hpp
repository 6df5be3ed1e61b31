#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace skeq {

// Common base so callers can catch everything from this library at once.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid construction parameter (bad preset, bad dimensions, bad density, ...).
struct ParameterError : Error {
  using Error::Error;
};

// A resolvent sum was evaluated at (minus) an eigenvalue above the rank tolerance.
struct PoleError : Error {
  using Error::Error;
};

// A scalar solve failed to bracket or to reach tolerance within the iteration cap.
struct ConvergenceError : Error {
  using Error::Error;
};

// Requested evaluation point is outside the admissible range. Carries the
// boundary (lambda0, z0, ...) when known so messages can name it.
struct DomainError : Error {
  explicit DomainError(const std::string& msg,
                       double boundary_value = std::nan(""))
      : Error(msg), boundary(boundary_value) {}
  double boundary;
};

// A matrix required to be invertible is numerically singular.
struct SingularError : Error {
  using Error::Error;
};

// Inner linear system condition number beyond the trust threshold (1e14).
struct IllConditionedError : Error {
  using Error::Error;
};

// Iterative solver stalled above the target residual for the whole budget.
struct NotSatisfiableError : Error {
  using Error::Error;
};

// More than the tolerated fraction of Monte Carlo trials failed.
struct FailureBudgetError : Error {
  using Error::Error;
};

}  // namespace skeq
