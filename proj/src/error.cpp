#include "srmix/error.hpp"

namespace srmix {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidDimensions: return "InvalidDimensions";
    case ErrorCode::SizeExceedsImage: return "SizeExceedsImage";
    case ErrorCode::InvalidTransformId: return "InvalidTransformId";
    case ErrorCode::PatchTooLarge: return "PatchTooLarge";
    case ErrorCode::MissingCounterpart: return "MissingCounterpart";
    case ErrorCode::EmptyDirectory: return "EmptyDirectory";
    case ErrorCode::DuplicateRecord: return "DuplicateRecord";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::LambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::NotDivisible: return "NotDivisible";
    case ErrorCode::NegativeSigma: return "NegativeSigma";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MalformedWeights: return "MalformedWeights";
    case ErrorCode::MalformedLog: return "MalformedLog";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace srmix
