#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace amiev {

enum class ErrorCode {
  TotalInternalReflection,
  DegenerateAxis,
  DegenerateGeometry,
  BehindCamera,
  ParseError,
  ResolutionMismatch,
  EmptyStream,
  OutOfRange,
  MissingTheta,
  InsufficientData,
  NonConvergence,
  NoEdges,
  MotionTooFast,
  PrismTooFast,
  TimeRangeMismatch,
  DimensionMismatch,
  IoError,
  InvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TotalInternalReflection: return "TotalInternalReflection";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::MissingTheta: return "MissingTheta";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NoEdges: return "NoEdges";
    case ErrorCode::MotionTooFast: return "MotionTooFast";
    case ErrorCode::PrismTooFast: return "PrismTooFast";
    case ErrorCode::TimeRangeMismatch: return "TimeRangeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this exception; `code()`
/// identifies the failure class, `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace amiev
