#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace h3t {

/// Bad configuration value, unknown key or unknown enum tag. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data could not be read or violates a data contract. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Evaluation protocol violated (e.g. a held-out item outside its domain).
class ProtocolError : public DataError {
 public:
  using DataError::DataError;
};

/// Shape mismatch inside the numeric engine.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite loss or value during training. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace h3t
