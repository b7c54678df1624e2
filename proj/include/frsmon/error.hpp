#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace frsmon {

enum class ErrorCode {
  NonSpd,
  InvalidTau,
  DegenerateMixture,
  AllLevelsZero,
  InsufficientData,
  MissingStep,
  InvalidRange,
  MissingSteps,
  ControlOutOfBounds,
  Infeasible,
  InsufficientHistory,
  MissingPrediction,
  DegenerateDenominator,
  DatasetOverlap,
  MissingCalibration,
  InvalidArgument,
  Io,
  Format,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class FrsError : public std::runtime_error {
 public:
  FrsError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace frsmon
