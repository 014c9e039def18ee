// Error taxonomy. The three families map 1:1 onto the CLI exit-code contract:
// config_error -> 2, data_error -> 3, numeric_error -> 4.
#pragma once

#include <stdexcept>
#include <string>

namespace netdirect {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or API usage: bad flag values, malformed config files,
// out-of-range tuning parameters, resource caps.
struct config_error : error {
  using error::error;
};

// Input data violates a schema or integrity contract: missing columns, duplicate
// keys, values out of range, coverage gaps, misaligned lengths.
struct data_error : error {
  using error::error;
};

// A numeric fit or evaluation failed: non-convergence, rank deficiency,
// non-positive-definite covariance, weight underflow.
struct numeric_error : error {
  using error::error;
};

}  // namespace netdirect
