#pragma once

#include <stdexcept>
#include <string>

namespace lgg {

// Error categories map onto distinct CLI exit codes, so keep them coarse.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / dimension mismatches and malformed operands.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration values or unsupported option combinations.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Unreadable, truncated, or inconsistent input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Violations of the training/evaluation protocol (single-class dimension,
// too few trials, diverged optimization, ...).
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

}  // namespace lgg
