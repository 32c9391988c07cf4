#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vsdalign {

enum class ErrorCode {
  BadMagic,
  TruncatedFile,
  NonFiniteValue,
  DuplicateId,
  ZeroRow,
  EmptySequence,
  ShapeMismatch,
  StaleCache,
  RowNotNormalized,
  NonPositiveTemperature,
  InvalidArgument,
  KExceedsN,
  DegeneratePoints,
  NumericOverflow,
  NonPositiveEpsilon,
  ManifestMismatch,
  DimensionMismatch,
  BatchTooSmall,
  ConfigMismatch,
  CorruptCheckpoint,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every domain failure in the library surfaces as this exception. The code
/// is stable and machine-checkable; the message carries offsets, indices or
/// shapes where relevant.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vsdalign
