#pragma once

#include <stdexcept>
#include <string>

namespace regdiv {

enum class ErrorCode {
  Parse,
  NonPositiveVolatility,
  NonPositiveDiscount,
  BadGeneratorRowSum,
  NegativeOffDiagonal,
  DimensionMismatch,
  DegenerateVolatility,
  NonPositiveDrift,
  OutOfRange,
  DriftHypothesisViolated,
  BarrierOutOfRange,
  NoConvergence,
  NotConcavePayoff,
  MaximumAtCap,
  RootIsolationFailure,
  OrderingUnresolved,
  SingularLinearSystem,
  LiquidateEverywhere,
  InvalidBand,
  Internal,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::NonPositiveVolatility: return "NonPositiveVolatility";
    case ErrorCode::NonPositiveDiscount: return "NonPositiveDiscount";
    case ErrorCode::BadGeneratorRowSum: return "BadGeneratorRowSum";
    case ErrorCode::NegativeOffDiagonal: return "NegativeOffDiagonal";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateVolatility: return "DegenerateVolatility";
    case ErrorCode::NonPositiveDrift: return "NonPositiveDrift";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DriftHypothesisViolated: return "DriftHypothesisViolated";
    case ErrorCode::BarrierOutOfRange: return "BarrierOutOfRange";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotConcavePayoff: return "NotConcavePayoff";
    case ErrorCode::MaximumAtCap: return "MaximumAtCap";
    case ErrorCode::RootIsolationFailure: return "RootIsolationFailure";
    case ErrorCode::OrderingUnresolved: return "OrderingUnresolved";
    case ErrorCode::SingularLinearSystem: return "SingularLinearSystem";
    case ErrorCode::LiquidateEverywhere: return "LiquidateEverywhere";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace regdiv
