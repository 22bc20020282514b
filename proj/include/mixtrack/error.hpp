#pragma once

#include <stdexcept>
#include <string>

namespace mixtrack {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  Validation = 1,
  Io = 2,
  Numerical = 3,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
  ErrorKind kind_;
};

/// Bad input data or parameters outside their domain.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

/// Malformed text input. The message names the source and line.
class ParseError : public ValidationError {
public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Caller broke an operation precondition (ordering, empty inputs).
class ContractError : public ValidationError {
public:
  explicit ContractError(const std::string& what) : ValidationError(what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

/// Singular or ill-conditioned linear algebra.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

}  // namespace mixtrack
