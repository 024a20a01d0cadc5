#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace icnn {

// Each error family maps to a distinct CLI exit code (see tools/).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

/// Invalid hyperparameters, missing inputs, bad option values.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

/// Tensor dimensions that violate an operation's shape contract.
class ShapeError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "shape"; }
};

/// Bad dataset content: class indices out of range, missing files, mismatched pairs.
class DataError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "data"; }
};

/// Malformed binary file. Carries the byte offset where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  const char* category() const noexcept override { return "format"; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Misuse of a stateful object, e.g. backward before forward.
class StateError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "state"; }
};

/// NaN/Inf encountered in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "numeric"; }
};

}  // namespace icnn
