#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ehom {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameter, inadmissible exponents, unsupported combination.
class ConfigError : public Error {
public:
  using Error::Error;
};

class RangeError : public Error {
public:
  using Error::Error;
};

/// Mismatched grid sizes or dimensions between operands.
class ShapeError : public Error {
public:
  using Error::Error;
};

class UndefinedRatioError : public Error {
public:
  using Error::Error;
};

/// Malformed or unsupported binary/JSON artifact.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Zero-conductance edges or a degenerate (trap) medium.
class SingularityError : public Error {
public:
  using Error::Error;
};

/// Artifacts computed from different fields were combined.
class ConsistencyError : public Error {
public:
  using Error::Error;
};

class StatisticsError : public Error {
public:
  using Error::Error;
};

class InequalityViolation : public Error {
public:
  using Error::Error;
};

class NonConvergenceError : public Error {
public:
  NonConvergenceError(const std::string& what, int iterations, double last_residual)
      : Error(what), iterations_(iterations), last_residual_(last_residual) {}

  int iterations() const noexcept { return iterations_; }
  double last_residual() const noexcept { return last_residual_; }

private:
  int iterations_;
  double last_residual_;
};

class NotPositiveDefinite : public Error {
public:
  NotPositiveDefinite(const std::string& what, std::vector<double> eigenvalues)
      : Error(what), eigenvalues_(std::move(eigenvalues)) {}

  const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }

private:
  std::vector<double> eigenvalues_;
};

} // namespace ehom
