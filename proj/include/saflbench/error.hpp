#pragma once

#include <stdexcept>
#include <string>

namespace saflbench {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree (batch width vs model input, two vectors of
// different architectures, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration value or document is invalid. `field()` names the offending
// key in `section.key` form when one exists.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Malformed text input. Line numbers are 1-based; 0 means "whole file".
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(line == 0 ? message
                        : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

// Raised when the federated state machine observes an impossible state, e.g.
// an update consumed before its base round finished.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace saflbench
