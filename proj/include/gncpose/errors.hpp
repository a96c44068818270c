#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gncpose {

enum class ErrorKind {
  InvalidIntrinsics,
  BehindCamera,
  DomainError,
  NoFiniteResiduals,
  EmptyInput,
  TooFewCorrespondences,
  NoConsensus,
  NumericalFailure,
  InitializationFailed,
  LengthMismatch,
  EmptyModel,
  InvalidConfig,
  ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NoFiniteResiduals: return "NoFiniteResiduals";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::InitializationFailed: return "InitializationFailed";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyModel: return "EmptyModel";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above, so
/// callers can dispatch on kind() instead of on exception type.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace gncpose
