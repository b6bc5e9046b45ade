#pragma once

#include <stdexcept>
#include <string>

namespace ajreserve {

// Every failure raised by the library derives from Error. The subclasses map
// one-to-one onto the CLI exit codes (see tools/main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV rows, config files).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  explicit ParseError(const std::string& what) : Error(what), row_(0) {}

  /// 1-based data row number, 0 when not tied to a row.
  [[nodiscard]] std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Input that parses but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical preconditions that fail at evaluation time.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ajreserve
