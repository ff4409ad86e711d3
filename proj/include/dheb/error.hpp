#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dheb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invalid input data. `line` is 1-based, 0 when not applicable.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MathError : public Error {
 public:
  using Error::Error;
};

// A node has too few observations for the requested estimate. Callers are
// expected to catch this and apply their fallback policy.
class InsufficientDataError : public MathError {
 public:
  using MathError::MathError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ModelFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace dheb
