#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seqdr {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or non-finite input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Record-level parse failure, carries the 1-based input line.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace seqdr
