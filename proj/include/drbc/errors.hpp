#pragma once

#include <stdexcept>
#include <string>

namespace drbc {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the documented range of an operation.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; the message carries the offending line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, const std::string& source = {})
      : Error((source.empty() ? std::string() : source + ": ") + "line " + std::to_string(line) + ": " + what),
        detail_(what),
        line_(line) {}

  const std::string& detail() const noexcept { return detail_; }

  std::size_t line() const noexcept { return line_; }

 private:
  std::string detail_;
  std::size_t line_;
};

/// Model-file structure errors (version, truncation, dimensions).
class FormatError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace drbc
