#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twintest {

enum class ErrorCode {
  kInvalidGeometry,
  kInvalidParameter,
  kLengthMismatch,
  kNegativePower,
  kIncompleteSnapshot,
  kInconsistentPositions,
  kMalformedLine,
  kUnknownTag,
  kNonFiniteValue,
  kMissingField,
  kIoError,
  kEmptyHistogram,
  kReversedInterval,
  kIncompatibleBinning,
  kInvalidSchedule,
  kConfigError,
};

std::string_view to_string(ErrorCode code);

/// Exception type thrown by every module. The code identifies the contract
/// that was violated; what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace twintest
