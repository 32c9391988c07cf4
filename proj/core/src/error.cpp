#include "vsdalign/error.hpp"

namespace vsdalign {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::RowNotNormalized: return "RowNotNormalized";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::KExceedsN: return "KExceedsN";
    case ErrorCode::DegeneratePoints: return "DegeneratePoints";
    case ErrorCode::NumericOverflow: return "NumericOverflow";
    case ErrorCode::NonPositiveEpsilon: return "NonPositiveEpsilon";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace vsdalign
