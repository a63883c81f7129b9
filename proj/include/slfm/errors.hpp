#pragma once

#include <stdexcept>
#include <string>

namespace slfm {

// Caller passed structurally invalid arguments: dimension mismatches,
// non-positive time steps, parameters outside their domain.
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine broke down at runtime (factorization failed even
// after jitter, weights underflowed, an iteration diverged).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// solve_stationary / solve_lyapunov called with a drift matrix that is
// not Hurwitz, so no stationary covariance exists.
class NoStationarySolutionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A series/spectral approximation could not be stabilized (e.g. no valid
// spectral factor at the requested truncation order).
class ApproximationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Problem size exceeds a hard cap meant to keep memory bounded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration file problems. Carries the offending field path (dotted,
// e.g. "forces[0].lengthscale") so the CLI can point at the exact key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Data file problems. Carries the 1-based line number when known (0 = n/a).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& message, long line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                    : message),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace slfm
