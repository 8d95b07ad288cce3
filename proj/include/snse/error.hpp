#pragma once

#include <stdexcept>
#include <string>

namespace snse {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A quadrature grid is too coarse for the requested band limit.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Iterative numerics that failed to converge (root finding etc.).
class InternalError : public Error {
 public:
  using Error::Error;
};

/// Non-finite coefficients appeared during time stepping.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double time)
      : Error(what + " at t=" + std::to_string(time)), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Picard iteration did not contract within the iteration budget.
class ContractionError : public Error {
 public:
  using Error::Error;
};

/// File access failures and malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Configuration problems. `line` is 0 when the error is not tied to a line.
class ConfigError : public Error {
 public:
  enum class Kind { syntax, missing_key, unknown_key, type_mismatch, constraint };

  ConfigError(Kind kind, const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        kind_(kind),
        line_(line) {}

  Kind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }

 private:
  Kind kind_;
  int line_;
};

}  // namespace snse
