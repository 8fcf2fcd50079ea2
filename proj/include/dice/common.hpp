// Shared error types and version constants.
#pragma once

#include <stdexcept>
#include <string>

namespace dice {

inline constexpr const char* kToolVersion = "0.1.0";

// Error taxonomy maps onto CLI exit codes: config=2, data=3, numeric=5.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

}  // namespace dice
