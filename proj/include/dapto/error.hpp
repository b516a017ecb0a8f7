#pragma once

#include <stdexcept>
#include <string>

namespace dapto {

/// Malformed input: wrong dimensions, non-finite values, out-of-range parameters.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A request that would exceed a configured size bound.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Inconsistent experiment or fit configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dapto
