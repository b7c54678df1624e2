#include "frsmon/error.hpp"

namespace frsmon {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSpd: return "NonSPD";
    case ErrorCode::InvalidTau: return "InvalidTau";
    case ErrorCode::DegenerateMixture: return "DegenerateMixture";
    case ErrorCode::AllLevelsZero: return "AllLevelsZero";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::MissingStep: return "MissingStep";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::MissingSteps: return "MissingSteps";
    case ErrorCode::ControlOutOfBounds: return "ControlOutOfBounds";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::DatasetOverlap: return "DatasetOverlap";
    case ErrorCode::MissingCalibration: return "MissingCalibration";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace frsmon
