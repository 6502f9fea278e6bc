#pragma once

#include <stdexcept>
#include <string>

namespace pkbd {

enum class ErrorCode {
  ZeroVector,
  InvalidDimension,
  DimensionMismatch,
  InvalidParameter,
  EfficiencyTooLow,
  TooManyClusters,
  AllRunsDegenerate,
  DegenerateResultant,
  NonFiniteUpdate,
  NoiseComponentUnsupported,
  TooFewEntries,
  LengthMismatch,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::EfficiencyTooLow: return "EfficiencyTooLow";
    case ErrorCode::TooManyClusters: return "TooManyClusters";
    case ErrorCode::AllRunsDegenerate: return "AllRunsDegenerate";
    case ErrorCode::DegenerateResultant: return "DegenerateResultant";
    case ErrorCode::NonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorCode::NoiseComponentUnsupported: return "NoiseComponentUnsupported";
    case ErrorCode::TooFewEntries: return "TooFewEntries";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pkbd
