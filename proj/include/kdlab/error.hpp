#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kdlab {

enum class ErrorKind {
  Parse,
  Duplicate,
  Validation,
  EmptyPanel,
  Range,
  EmptySplit,
  Length,
  Domain,
  Degenerate,
  Numeric,
  Feasibility,
  Underfull,
  Shape,
  InsufficientHistory,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Duplicate: return "duplicate error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::EmptyPanel: return "empty-panel error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::EmptySplit: return "empty-split error";
    case ErrorKind::Length: return "length error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Degenerate: return "degenerate error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Feasibility: return "feasibility error";
    case ErrorKind::Underfull: return "underfull error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::InsufficientHistory: return "insufficient-history error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

/// Every failure raised by the library. The kind drives CLI exit codes:
/// Numeric maps to 3, everything else to 2.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace kdlab
