#pragma once

#include <stdexcept>
#include <string>

namespace causal_ops {

enum class ErrorKind {
  DimensionMismatch,
  NotPSD,
  NotTracePreserving,
  NotNonselective,
  PreconditionViolated,
  DegenerateOverlap,
  CrossingOutsideCouplingZone,
  NonlocalUnitary,
  RouteNotFound,
  InvalidValue,
  Parse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::NotTracePreserving: return "NotTracePreserving";
    case ErrorKind::NotNonselective: return "NotNonselective";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::DegenerateOverlap: return "DegenerateOverlap";
    case ErrorKind::CrossingOutsideCouplingZone: return "CrossingOutsideCouplingZone";
    case ErrorKind::NonlocalUnitary: return "NonlocalUnitary";
    case ErrorKind::RouteNotFound: return "RouteNotFound";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace causal_ops
