#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace waterline {

enum class ErrorCode {
  kInvalidArgument,
  kNoForeground,
  kDegenerateRegression,
  kNoDetection,
  kDimensionMismatch,
  kLengthMismatch,
  kMixedCenterX,
  kMissingGroundTruth,
  kInfeasibleSizes,
  kMissingPrediction,
  kSchemaViolation,
  kIoError,
  kEmptyDataset,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace waterline
