#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prokwo {

// Root of every exception the library throws on bad input or failed numerics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or violated precondition on an argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or malformed input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class UndefinedCorrelationError : public DataError {
 public:
  using DataError::DataError;
};

// Logistic fit diverged because outcomes are (quasi-)separable.
class SeparationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace prokwo
