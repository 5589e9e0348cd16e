#pragma once

#include <stdexcept>
#include <string>

namespace magweyl {

// Bad arguments: non-finite values, out-of-range parameters, malformed config.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Base for failures of a numerical procedure on otherwise valid input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A series or level sum was cut off while its next term is still active.
class TruncationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Quadrature or refinement did not reach the requested stationarity.
class AccuracyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A result that must be real (or Hermitian) came out with a large residual.
class SymmetryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// ODE integration failed (step underflow, energy drift).
class IntegrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Not enough events/points to carry out a fit or geometric measurement.
class InsufficientData : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Requested item (winding, level, ...) not present in the data.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// A dense allocation would exceed the configured memory guard.
class MemoryGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace magweyl
