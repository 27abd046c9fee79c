#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpe {

/// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// True when retrying the same operation may succeed.
  virtual bool transient() const noexcept { return false; }
};

// ---- corpus ---------------------------------------------------------------

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed record. `line()` is 1-based, 0 when not tied to a line.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateKeyError : public FormatError {
 public:
  using FormatError::FormatError;
};

class SelfComparisonError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ReferentialError : public Error {
 public:
  using Error::Error;
};

// ---- prompting ------------------------------------------------------------

class MissingBindingError : public Error {
 public:
  explicit MissingBindingError(std::vector<std::string> names);
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

class UnknownBindingError : public Error {
 public:
  explicit UnknownBindingError(std::vector<std::string> names);
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

class EmptyValueError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

// ---- backend --------------------------------------------------------------

class AuthError : public Error {
 public:
  using Error::Error;
};

class RateLimitError : public Error {
 public:
  using Error::Error;
  bool transient() const noexcept override { return true; }
};

class TransportError : public Error {
 public:
  using Error::Error;
  bool transient() const noexcept override { return true; }
};

/// Non-auth HTTP failure. 408 and 5xx are transient, other statuses are not.
class ProviderError : public Error {
 public:
  ProviderError(int status, const std::string& message)
      : Error("provider returned HTTP " + std::to_string(status) + ": " + message),
        status_(status) {}
  int status() const noexcept { return status_; }
  bool transient() const noexcept override { return status_ == 408 || status_ >= 500; }

 private:
  int status_;
};

class CacheCorruptionError : public Error {
 public:
  using Error::Error;
};

class MissingFixtureError : public Error {
 public:
  using Error::Error;
};

// ---- parsing --------------------------------------------------------------

class ParseError : public Error {
 public:
  using Error::Error;
};

class NoMatchError : public ParseError {
 public:
  using ParseError::ParseError;
};

class AmbiguityError : public ParseError {
 public:
  using ParseError::ParseError;
};

class NoNumberError : public ParseError {
 public:
  using ParseError::ParseError;
};

class RangeError : public ParseError {
 public:
  using ParseError::ParseError;
};

class UnknownClassError : public Error {
 public:
  using Error::Error;
};

// ---- chains / metrics -----------------------------------------------------

class InputError : public Error {
 public:
  using Error::Error;
};

class EmptySystemError : public Error {
 public:
  using Error::Error;
};

class InsufficientSystemsError : public Error {
 public:
  using Error::Error;
};

// ---- alignment ------------------------------------------------------------

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class MatrixShapeError : public Error {
 public:
  using Error::Error;
};

class ValueParseError : public Error {
 public:
  ValueParseError(std::size_t row, std::size_t col, const std::string& cell)
      : Error("cannot parse alignment value '" + cell + "' at row " + std::to_string(row) +
              ", column " + std::to_string(col)),
        row_(row),
        col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class InputTooLargeError : public Error {
 public:
  using Error::Error;
};

class TooManyTokensError : public Error {
 public:
  using Error::Error;
};

// ---- cli ------------------------------------------------------------------

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kpe
