#pragma once

#include <stdexcept>
#include <string>

namespace ammsnn {

// Error taxonomy shared across the toolkit. The CLI maps each kind onto a
// distinct exit code, so new failure modes should pick (or add) the kind
// that matches what went wrong rather than throwing std::runtime_error.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes disagree (matmul inner dims, concat axes, ...).
class DimError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value (even conv width, unknown variant, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unusable input data (bad TSV line, empty sentence, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// API misuse (backward on a non-scalar, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// A representation degraded to (near-)zero norm; cosine is undefined.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (overflow, NaN grads).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ammsnn
