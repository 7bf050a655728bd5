#include "waterline/error.hpp"

namespace waterline {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoForeground: return "NoForeground";
    case ErrorCode::kDegenerateRegression: return "DegenerateRegression";
    case ErrorCode::kNoDetection: return "NoDetection";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kMixedCenterX: return "MixedCenterX";
    case ErrorCode::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::kInfeasibleSizes: return "InfeasibleSizes";
    case ErrorCode::kMissingPrediction: return "MissingPrediction";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
  }
  return "Unknown";
}

}  // namespace waterline
