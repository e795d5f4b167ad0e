#pragma once

#include <stdexcept>
#include <string>

namespace frailtycc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the domain of a kernel (negative exposure, bad index...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data. `line` is 0 when not file-related.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Numerical failure: non-convergent quadrature, vanishing denominators,
/// singular Jacobians.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace frailtycc
