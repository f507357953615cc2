#pragma once

#include <stdexcept>
#include <string>

namespace crxo {

// Bad input or configuration supplied by the user (CLI exit 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Estimator/weighting pair that is not defined for the data.
struct InadmissibleError : ConfigError {
  using ConfigError::ConfigError;
};

// File could not be read or written (CLI exit 3).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Singular systems, failed fits (CLI exit 4).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace crxo
