#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nashfiber {

enum class ErrorKind {
  DimensionMismatch,
  ZeroVector,
  EmptyInput,
  Syntax,
  UnknownVariable,
  ZeroPolynomial,
  SingularPoint,
  OffVariety,
  NoConvergence,
  SignViolation,
  EmptySlice,
  AllScalesEmpty,
  EmptyPatch,
  NotStabilized,
  NotOnCone,
  InsufficientDensity,
  SingularLocusUnavailable,
  RayNotInCone,
  SingularSample,
  RayInCone,
  ProjectionLoss,
  HypothesisFailed,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can map it onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nashfiber
