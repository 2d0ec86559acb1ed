#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateEdge : public Error {
 public:
  using Error::Error;
};

class OutsideBox : public Error {
 public:
  using Error::Error;
};

class DegenerateBox : public Error {
 public:
  using Error::Error;
};

class InvalidQuad : public Error {
 public:
  using Error::Error;
};

class InvalidImage : public Error {
 public:
  using Error::Error;
};

class InvalidProbability : public Error {
 public:
  using Error::Error;
};

class InvalidParams : public Error {
 public:
  using Error::Error;
};

class UnknownClass : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line` and `column` are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(long iteration)
      : Error("training diverged (non-finite loss) at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace obb
