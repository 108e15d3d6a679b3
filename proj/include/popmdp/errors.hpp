#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace popmdp {

enum class ErrorCode {
  LengthMismatch,
  BadProbabilities,
  NonPositiveReturn,
  SingularCovariance,
  ZeroMeanRisk,
  BadWeights,
  EmptySupport,
  NonFiniteState,
  SupportBlowup,
  SearchBlowup,
  NotDirac,
  DegenerateRisk,
  NonFiniteCost,
  NonUnitVariance,
  NegativeVariance,
  TooFewSamples,
  BadEll,
  InvalidArgument,
  ParseError,
};

/// Coarse grouping used by the command-line front-end to pick an exit code.
enum class ErrorCategory { Input, Numeric, Resource };

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BadProbabilities: return "BadProbabilities";
    case ErrorCode::NonPositiveReturn: return "NonPositiveReturn";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::ZeroMeanRisk: return "ZeroMeanRisk";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::SupportBlowup: return "SupportBlowup";
    case ErrorCode::SearchBlowup: return "SearchBlowup";
    case ErrorCode::NotDirac: return "NotDirac";
    case ErrorCode::DegenerateRisk: return "DegenerateRisk";
    case ErrorCode::NonFiniteCost: return "NonFiniteCost";
    case ErrorCode::NonUnitVariance: return "NonUnitVariance";
    case ErrorCode::NegativeVariance: return "NegativeVariance";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::BadEll: return "BadEll";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

constexpr ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SingularCovariance:
    case ErrorCode::ZeroMeanRisk:
    case ErrorCode::DegenerateRisk:
    case ErrorCode::NonFiniteCost:
    case ErrorCode::NonUnitVariance:
    case ErrorCode::NegativeVariance:
      return ErrorCategory::Numeric;
    case ErrorCode::SupportBlowup:
    case ErrorCode::SearchBlowup:
      return ErrorCategory::Resource;
    default:
      return ErrorCategory::Input;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace popmdp
