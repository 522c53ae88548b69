#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reldet {

/// Tensor extents that do not agree for the requested operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (e.g. log of 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A fixed capacity (query slots, enumeration size) was exceeded.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Non-finite values appeared during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint manifest and weights do not describe the same model.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reading or writing a file failed at the OS level.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `position()` is a byte offset, `line()` is 1-based
/// (0 when unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position, std::size_t line = 0)
      : std::runtime_error(what + " (byte " + std::to_string(position) +
                           (line ? ", line " + std::to_string(line) : std::string()) + ")"),
        position_(position),
        line_(line) {}

  std::size_t position() const noexcept { return position_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t position_;
  std::size_t line_;
};

}  // namespace reldet
