#pragma once

#include <stdexcept>
#include <string>

namespace binsight {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed caller input: bad shapes, non-finite samples, empty sequences.
struct InvalidInput : Error {
  explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

// Inconsistent configuration: layer/shape mismatches, bad windows, bad keys.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Dataset / file problems: missing paths, corrupt containers, bad manifests.
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Numerical failure at run time (NaN loss, degenerate statistics).
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace binsight
