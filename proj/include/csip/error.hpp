#pragma once

#include <stdexcept>
#include <string>

namespace csip {

// Base of every error the library raises. The C API maps each subclass to a
// distinct status code (see csip.h).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that cannot be combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (scenario, dims, split parameters, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered, or a metric that is undefined for the given input.
class NumericError : public Error {
 public:
  using Error::Error;
};

// File could not be read/written or has a malformed layout.
class IoError : public Error {
 public:
  using Error::Error;
};

// Benchmark could not produce a trustworthy measurement.
class MeasurementError : public Error {
 public:
  using Error::Error;
};

}  // namespace csip
