#pragma once

#include <stdexcept>
#include <string>

namespace emodub {

enum class ErrorKind {
  Schema,    // vector dims disagree with the registered schema
  Argument,  // caller passed an out-of-domain value
  Shape,     // matrix shapes do not compose
  Config,    // invalid model/layer configuration
  State,     // operation applied in the wrong pipeline stage
  Format,    // on-disk file is malformed
  Io,        // the OS refused a read or write
  Numeric,   // a computation produced NaN/Inf
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& w) : Error(ErrorKind::Schema, w) {}
};
struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::Argument, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct StateError : Error {
  explicit StateError(const std::string& w) : Error(ErrorKind::State, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::Numeric, w) {}
};

/// Malformed binary file. `reason` distinguishes the failure so callers
/// (and tests) can branch without parsing the message.
enum class FormatReason { BadMagic, VersionMismatch, Truncated, DimMismatch, TrailingBytes, BadValue };

class FormatError : public Error {
 public:
  FormatError(FormatReason reason, const std::string& detail);
  FormatReason reason() const noexcept { return reason_; }

 private:
  FormatReason reason_;
};

}  // namespace emodub
