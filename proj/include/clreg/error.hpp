#pragma once

#include <stdexcept>
#include <string>

namespace clreg {

// Base for all library errors. Numerical non-convergence is reported through
// FitResult::status, not by throwing.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, double min_singular_value)
      : Error(what), min_singular_value_(min_singular_value) {}
  double min_singular_value() const noexcept { return min_singular_value_; }

 private:
  double min_singular_value_;
};

// Bad input data (ingest, response coding, degenerate covariates).
class DataError : public Error {
 public:
  using Error::Error;
};

// A procedure that needs at least one converged fit got none.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Bad configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace clreg
