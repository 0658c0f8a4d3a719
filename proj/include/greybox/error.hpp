#pragma once

#include <stdexcept>
#include <string>

namespace greybox {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent sizes, indices out of range, malformed arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (experiment files, CLI flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a result (singular solve,
/// undefined logarithm, rank loss that cannot be worked around).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace greybox
