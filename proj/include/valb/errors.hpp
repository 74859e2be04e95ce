#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace valb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyLog : public Error {
 public:
  EmptyLog() : Error("log message contains no tokens") {}
};

/// Malformed input file. `line` is 1-based, or 0 when not line-oriented.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class TagError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IOBError : public FormatError {
 public:
  using FormatError::FormatError;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Raised when a binary-mode model or annotation set is used where
/// category-level labels are required.
class ModeError : public Error {
 public:
  using Error::Error;
};

/// Predicted and gold annotations disagree on tokenization.
class TokenMismatch : public Error {
 public:
  TokenMismatch(std::size_t index, const std::string& what)
      : Error("log " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

}  // namespace valb
