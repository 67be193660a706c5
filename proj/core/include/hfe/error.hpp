#pragma once

#include <stdexcept>
#include <string>

namespace hfe {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (shapes, ranges, sizes).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Output geometry collapsed to zero elements.
class DegenerateGeometry : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// NaN/Inf detected in a loss or parameter update.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or incompatible checkpoint. `field()` names the
// part of the container that failed to parse or match.
class CheckpointError : public Error {
 public:
  CheckpointError(std::string field, const std::string& what)
      : Error("checkpoint " + field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hfe
