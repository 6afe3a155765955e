#pragma once

#include <stdexcept>

namespace glsm {

/// Invalid or inconsistent configuration; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical stage failed (e.g. a regression that did not yield finite coefficients);
/// maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a model is rejected as degenerate (e.g. a zero eigenvalue where an inverse is needed).
class DegenerateModelError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace glsm
