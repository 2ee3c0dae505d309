#include "emodub/errors.h"

namespace emodub {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Argument: return "argument error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Numeric: return "numeric error";
  }
  return "error";
}

namespace {

std::string reason_text(FormatReason reason) {
  switch (reason) {
    case FormatReason::BadMagic: return "bad magic";
    case FormatReason::VersionMismatch: return "version mismatch";
    case FormatReason::Truncated: return "truncated payload";
    case FormatReason::DimMismatch: return "dim mismatch";
    case FormatReason::TrailingBytes: return "trailing bytes";
    case FormatReason::BadValue: return "bad value";
  }
  return "format error";
}

}  // namespace

FormatError::FormatError(FormatReason reason, const std::string& detail)
    : Error(ErrorKind::Format,
            detail.empty() ? reason_text(reason) : reason_text(reason) + ": " + detail),
      reason_(reason) {}

}  // namespace emodub
