#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semcomp {

enum class ErrorCode {
  EmptyInput,
  DimensionMismatch,
  ZeroVector,
  DegenerateCohort,
  InvalidRatio,
  InvalidLevel,
  CorruptStream,
  UnknownTemplate,
  EmptyPayload,
  CatalogCorrupt,
  AuthMissing,
  TransportFailure,
  RateLimited,
  ReplayMiss,
  SecretLeak,
  IoFailure,
  ManifestInvalid,
  MissingFile,
  NotUtf8,
  ConfigInvalid,
  UnparseableVerdict,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (pipeline, CLI) can classify it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace semcomp
