#pragma once

#include <stdexcept>
#include <string>

namespace jerx {

enum class ErrorKind {
  kOverlappingSpans,
  kSpanOutOfBounds,
  kUnknownLabel,
  kParseError,
  kInvariantViolation,
  kCorpusTooSmall,
  kInvalidArgument,
  kMissingEmbeddingRecord,
  kDimensionMismatch,
  kLabelOutOfRange,
  kNonFiniteLoss,
  kEmptyInput,
  kConfigError,
  kVocabMismatch,
  kIoError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kOverlappingSpans: return "OverlappingSpans";
    case ErrorKind::kSpanOutOfBounds: return "SpanOutOfBounds";
    case ErrorKind::kUnknownLabel: return "UnknownLabel";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kInvariantViolation: return "InvariantViolation";
    case ErrorKind::kCorpusTooSmall: return "CorpusTooSmall";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kMissingEmbeddingRecord: return "MissingEmbeddingRecord";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kVocabMismatch: return "VocabMismatch";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

// Every failure in the library surfaces as an Error carrying its kind, so
// callers (the CLI in particular) can map kinds onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // what() without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace jerx
