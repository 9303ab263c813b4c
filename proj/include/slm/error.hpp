#pragma once

#include <stdexcept>
#include <string>

namespace slm {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A record could not be parsed; carries the 1-based line where it starts.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// ROCStories cloze-test records offer two candidate endings and therefore have
// no single gold order.
class TwoChoiceStoryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Exhaustive search was asked to enumerate more permutations than allowed.
class SearchCapError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace slm
