#pragma once

#include <stdexcept>
#include <string>

namespace mixdec {

// Base of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A value violates a documented invariant (bad config, shape mismatch, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A required input file is missing or unreadable.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mixdec
