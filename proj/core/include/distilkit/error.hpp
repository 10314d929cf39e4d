// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace distilkit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input data, configuration, or precondition violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Incompatible tensor shapes for an operation.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A computation produced a non-finite value (NaN/Inf).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace distilkit
