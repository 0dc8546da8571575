#pragma once

#include <stdexcept>
#include <string>

namespace dgm {

// Failure categories. The CLI maps these to exit codes; the model loader
// reports corruption through the four format codes.
enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kNonFinite,
  kData,
  kIo,
  kConfig,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kChecksum,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kData: return "data";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kBadVersion: return "bad-version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kChecksum: return "checksum";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace dgm
