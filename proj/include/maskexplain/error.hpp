#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maskexplain {

enum class ErrorCode {
  ShapeMismatch,
  UnsupportedOperation,
  ContractViolation,
  BadMagic,
  VersionMismatch,
  BlobLengthMismatch,
  TensorShapeMismatch,
  ManifestInvalid,
  Truncated,
  BadDimensions,
  Io,
  InvalidArgument,
  TrainingDiverged,
  OptimizationDiverged,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable category next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace maskexplain
