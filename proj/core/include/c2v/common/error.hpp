#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace c2v {

/// Base of all library errors. Anything that is not a ValidationError is
/// treated as an internal failure by the command-line tool (exit code 1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input rejected by a precondition check (exit code 2 at the CLI).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TopologyError : public ValidationError {
 public:
  TopologyError(int v0, int v1, const std::string& what)
      : ValidationError("edge (" + std::to_string(v0) + ", " + std::to_string(v1) + "): " + what),
        v0_(v0),
        v1_(v1) {}

  int edge_first() const noexcept { return v0_; }
  int edge_second() const noexcept { return v1_; }

 private:
  int v0_;
  int v1_;
};

class ShapeMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Non-finite values or similar numerical breakdown during computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. running backward twice over the same graph.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace c2v
