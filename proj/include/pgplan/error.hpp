#pragma once

#include <stdexcept>
#include <string>

namespace pgplan {

enum class ErrorCode {
  MalformedLine,
  DuplicateElementName,
  DanglingNode,
  MissingGround,
  InfeasibleSpec,
  FloatingComponent,
  SingularSystem,
  NoConvergence,
  DimTooLarge,
  NonPositiveInput,
  UncoveredBlock,
  InfeasibleWidths,
  NoCoordinates,
  EmptyDataset,
  DegenerateTarget,
  NotNormalized,
  ShapeMismatch,
  DivergedLoss,
  EmptyInput,
  IoError,
  BadConfig,
};

const char* error_code_name(ErrorCode code);

// Single exception type for all library failures; the CLI maps it to
// "ERROR <code>: <detail>" on exit 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace pgplan
