#pragma once

#include <stdexcept>
#include <string>

namespace caos {

// Error categories map onto CLI exit codes (config 2, data 3, invariant 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Raised when a guaranteed property (e.g. full-conformal set inclusion) is
// observed to fail. That is a bug, not an experimental outcome.
class InvariantViolation : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class PreconditionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace caos
