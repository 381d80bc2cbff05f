#pragma once

#include <stdexcept>
#include <string>

namespace ofnav {

/// Malformed or inconsistent input data (zero quaternion, size mismatch, ...).
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A tuning parameter outside its admissible range.
struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Filter covariance or innovation lost positive-definiteness, or a state became non-finite.
struct NumericalFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Initialization attempted while the vehicle is not at rest.
struct NotStatic : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A configuration document that is malformed or has an out-of-range field.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Unreadable or corrupted input files (sensor logs, CSV, frames).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ofnav
