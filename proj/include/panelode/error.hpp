#pragma once

#include <stdexcept>
#include <string>

namespace panelode {

/// Error category, printed as the first token of what() so callers and the
/// CLI can parse failures mechanically.
enum class ErrorKind {
  kUsage,
  kShape,
  kData,
  kSolver,
  kNotFinite,
  kIo,
  kThreshold,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kData: return "data";
    case ErrorKind::kSolver: return "solver";
    case ErrorKind::kNotFinite: return "nonfinite";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kThreshold: return "threshold";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace panelode
