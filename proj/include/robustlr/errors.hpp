#pragma once

#include <stdexcept>
#include <string>

namespace robustlr {

enum class ErrorCode {
  DimensionMismatch,
  NonFiniteValue,
  InvalidArgument,
  InvalidCovariance,
  EpsilonTooLarge,
  NotPositiveDefinite,
  TooFewSamples,
  EmptyDataset,
  ProvenanceLost,
  DegenerateScale,
  NoThresholdFound,
  IterationLimitExceeded,
  SingularSystem,
  EpsOutOfRange,
  RangeViolation,
  RootFindFailure,
  DivergentChiSquare,
  GridOverflow,
  QueryOutOfRange,
  IoError,
  ConfigError,
};

const char* error_code_name(ErrorCode code);

/// Library-wide exception type carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace robustlr
