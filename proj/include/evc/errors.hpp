#pragma once

#include <stdexcept>
#include <string>

namespace evc {

/// Malformed arguments: dimension mismatches, out-of-range indices,
/// parameters outside their documented domain.
class InvalidInputError : public std::runtime_error {
  public:
    explicit InvalidInputError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solver hit its iteration cap before reaching the
/// requested residual.
class SolverFailureError : public std::runtime_error {
  public:
    explicit SolverFailureError(const std::string& what) : std::runtime_error(what) {}
};

/// A sampling-based estimator exhausted its budget (e.g. rejection
/// sampling in a thin tail).
class EstimationFailureError : public std::runtime_error {
  public:
    explicit EstimationFailureError(const std::string& what) : std::runtime_error(what) {}
};

/// Random problem generation could not satisfy its constraints within
/// the retry cap.
class GenerationFailureError : public std::runtime_error {
  public:
    explicit GenerationFailureError(const std::string& what) : std::runtime_error(what) {}
};

/// File parse or write failure.
class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace evc
