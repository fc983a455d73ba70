#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srmix {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  CorruptFile,
  IoError,
  InvalidDimensions,
  SizeExceedsImage,
  InvalidTransformId,
  PatchTooLarge,
  MissingCounterpart,
  EmptyDirectory,
  DuplicateRecord,
  MalformedManifest,
  DimensionMismatch,
  ImageTooSmall,
  InvalidAlpha,
  LambdaOutOfRange,
  NotDivisible,
  NegativeSigma,
  EmptyDataset,
  InvalidConfig,
  ShapeMismatch,
  NonFiniteGradient,
  NonFiniteLoss,
  MalformedWeights,
  MalformedLog,
  Usage,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace srmix
