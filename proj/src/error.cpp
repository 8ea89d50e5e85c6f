#include "twintest/error.hpp"

namespace twintest {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidGeometry: return "invalid-geometry";
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kNegativePower: return "negative-power";
    case ErrorCode::kIncompleteSnapshot: return "incomplete-snapshot";
    case ErrorCode::kInconsistentPositions: return "inconsistent-positions";
    case ErrorCode::kMalformedLine: return "malformed-line";
    case ErrorCode::kUnknownTag: return "unknown-tag";
    case ErrorCode::kNonFiniteValue: return "non-finite-value";
    case ErrorCode::kMissingField: return "missing-field";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kEmptyHistogram: return "empty-histogram";
    case ErrorCode::kReversedInterval: return "reversed-interval";
    case ErrorCode::kIncompatibleBinning: return "incompatible-binning";
    case ErrorCode::kInvalidSchedule: return "invalid-schedule";
    case ErrorCode::kConfigError: return "config-error";
  }
  return "unknown";
}

}  // namespace twintest
