#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rbam {

// Operand shapes are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input statistics are degenerate (e.g. a covariance over a single sample).
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller-side precondition was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An object was used in a state that does not allow the operation.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid model/training/run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed on-disk data. offset() is the byte position where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace rbam
