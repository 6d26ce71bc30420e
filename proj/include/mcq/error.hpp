#pragma once

#include <stdexcept>
#include <string>

namespace mcq {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kIndexOutOfRange,
  kShapeMismatch,
  kCorruptMagic,
  kVersionUnsupported,
  kDigestMismatch,
  kTruncated,
  kCorruptStream,
  kIo,
  kDiverged,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kIndexOutOfRange: return "index-out-of-range";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kCorruptMagic: return "corrupt-magic";
    case ErrorCode::kVersionUnsupported: return "version-unsupported";
    case ErrorCode::kDigestMismatch: return "digest-mismatch";
    case ErrorCode::kTruncated: return "truncation";
    case ErrorCode::kCorruptStream: return "corrupt-stream";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kDiverged: return "diverged";
  }
  return "unknown";
}

// Every recoverable failure in the library surfaces as this exception.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace mcq
