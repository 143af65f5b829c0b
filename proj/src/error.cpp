#include "semcomp/error.hpp"

namespace semcomp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DegenerateCohort: return "DegenerateCohort";
    case ErrorCode::InvalidRatio: return "InvalidRatio";
    case ErrorCode::InvalidLevel: return "InvalidLevel";
    case ErrorCode::CorruptStream: return "CorruptStream";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::EmptyPayload: return "EmptyPayload";
    case ErrorCode::CatalogCorrupt: return "CatalogCorrupt";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::TransportFailure: return "TransportFailure";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::SecretLeak: return "SecretLeak";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::NotUtf8: return "NotUtf8";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
  }
  return "Unknown";
}

}  // namespace semcomp
