#pragma once

#include <stdexcept>
#include <string>

namespace paad {

// Error taxonomy. Every throwing function documents which of these it uses.

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StreamError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace paad
