#pragma once

#include <stdexcept>
#include <string>

namespace recourse {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for a primitive.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (CSV, schema, partitioning).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A loss became NaN or infinite during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace recourse
