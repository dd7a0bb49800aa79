#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fusionkit {

enum class ErrorCode {
  // Vector math
  kZeroVector,
  kNonFinite,
  kEmptyList,
  kDimMismatch,
  // Store and manifest I/O
  kBadMagic,
  kVersionUnsupported,
  kTruncatedFile,
  kManifestInvalid,
  kIoError,
  // Fusion, scan and metrics
  kWeightOutOfRange,
  kMissingModality,
  kEmptyEvalSet,
  kEmptyInput,
  kLengthMismatch,
  kEmptySubset,
  kInvalidArgument,
  // Prompts
  kUnknownPlaceholder,
  kEmptyAxis,
  kUnknownDataset,
  kMalformedFile,
  kEmptyClassEntry,
  // Bridge
  kBridgeUnavailable,
  kProtocolError,
  kRemoteError,
  // Harness
  kConfigInvalid,
  kSpecInvalid,
};

std::string_view to_string(ErrorCode code);

/// Broad family of an error, used by the CLI to pick an exit code.
enum class ErrorCategory { kConfig, kData, kBridge };

ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fusionkit
