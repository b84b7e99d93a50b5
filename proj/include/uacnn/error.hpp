#pragma once

#include <stdexcept>
#include <string>

namespace uacnn {

enum class ErrorKind {
  InvalidArgument,
  ShapeMismatch,
  NegativeVariance,
  NonFinite,
  InvalidGeometry,
  Parse,
  UnknownLayer,
  ShapeChain,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::NegativeVariance: return "negative variance";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::InvalidGeometry: return "invalid geometry";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::UnknownLayer: return "unknown layer kind";
    case ErrorKind::ShapeChain: return "shape-chain mismatch";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

/// Single exception type for the library; `kind()` discriminates the cause.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, std::string(to_string(kind)) + ": " + detail);
}

}  // namespace uacnn
