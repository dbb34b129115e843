#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rowssl {

// Argument violates a documented precondition (shape, range, sign).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Object is not in a state that allows the call (uninitialized bank, empty queue, ...).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Not enough samples available to satisfy a requested count.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metric has no defined value for the given inputs (e.g. empty class subset).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed text input; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Binary checkpoint could not be restored.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rowssl
