#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vloc {

enum class ErrorCode {
  kInvalidArgument,
  kBehindCamera,
  kMissingObservation,
  kInfeasibleSpec,
  kTooFewVisible,
  kDegenerateModel,
  kTooFewDescriptors,
  kEmptyQuery,
  kDegenerateConfiguration,
  kSingularBlock,
  kNoModelFound,
  kPoolEmpty,
  kEmptyInput,
  kCorruptHeader,
  kVersionMismatch,
  kTruncatedPayload,
  kCorruptPayload,
  kConfigInvalid,
  kIo,
};

constexpr std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kMissingObservation: return "MissingObservation";
    case ErrorCode::kInfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::kTooFewVisible: return "TooFewVisible";
    case ErrorCode::kDegenerateModel: return "DegenerateModel";
    case ErrorCode::kTooFewDescriptors: return "TooFewDescriptors";
    case ErrorCode::kEmptyQuery: return "EmptyQuery";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kSingularBlock: return "SingularBlock";
    case ErrorCode::kNoModelFound: return "NoModelFound";
    case ErrorCode::kPoolEmpty: return "PoolEmpty";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kCorruptHeader: return "CorruptHeader";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kCorruptPayload: return "CorruptPayload";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

// Every failure raised by the library carries a code so callers and tests
// can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ToString(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) Fail(code, message);
}

}  // namespace vloc
