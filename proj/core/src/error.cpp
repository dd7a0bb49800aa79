#include "fusionkit/error.hpp"

#include <string>

namespace fusionkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kEmptyList: return "EmptyList";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kManifestInvalid: return "ManifestInvalid";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kWeightOutOfRange: return "WeightOutOfRange";
    case ErrorCode::kMissingModality: return "MissingModality";
    case ErrorCode::kEmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptySubset: return "EmptySubset";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::kEmptyAxis: return "EmptyAxis";
    case ErrorCode::kUnknownDataset: return "UnknownDataset";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kEmptyClassEntry: return "EmptyClassEntry";
    case ErrorCode::kBridgeUnavailable: return "BridgeUnavailable";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kRemoteError: return "RemoteError";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kSpecInvalid: return "SpecInvalid";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBridgeUnavailable:
    case ErrorCode::kProtocolError:
    case ErrorCode::kRemoteError:
      return ErrorCategory::kBridge;
    case ErrorCode::kConfigInvalid:
    case ErrorCode::kSpecInvalid:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kWeightOutOfRange:
    case ErrorCode::kUnknownPlaceholder:
    case ErrorCode::kEmptyAxis:
    case ErrorCode::kUnknownDataset:
      return ErrorCategory::kConfig;
    default:
      return ErrorCategory::kData;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace fusionkit
