#pragma once

#include <stdexcept>
#include <string>

namespace frnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument values (maps to CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent tensor, image or volume dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf in an input, a loss or a gradient (maps to CLI exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File-level failures: I/O, malformed FRV1 volumes, malformed checkpoints.
class FormatError : public Error {
 public:
  enum class Kind { io, bad_magic, truncated, size_mismatch, manifest };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace frnet
