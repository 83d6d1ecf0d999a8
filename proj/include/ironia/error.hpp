#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ironia {

enum class ErrorCode {
  DuplicateId,
  UnknownLabel,
  EmptyText,
  ModeError,
  MissingLabel,
  EmptyDataset,
  RatioError,
  StratifyError,
  ContractViolation,
  TagParseError,
  ExplanationParseError,
  EmptyCompletion,
  PreconditionError,
  BackendError,
  NotFound,
  AlreadyResolved,
  NotAssigned,
  InvalidVerdict,
  IncompleteQueue,
  UnknownEncoder,
  EncoderLoadError,
  DimError,
  LabelError,
  EmptyConfusion,
  EmptyReport,
  ConfigError,
  FileError,
  ParseError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::ModeError: return "ModeError";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::RatioError: return "RatioError";
    case ErrorCode::StratifyError: return "StratifyError";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::TagParseError: return "TagParseError";
    case ErrorCode::ExplanationParseError: return "ExplanationParseError";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::PreconditionError: return "PreconditionError";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::AlreadyResolved: return "AlreadyResolved";
    case ErrorCode::NotAssigned: return "NotAssigned";
    case ErrorCode::InvalidVerdict: return "InvalidVerdict";
    case ErrorCode::IncompleteQueue: return "IncompleteQueue";
    case ErrorCode::UnknownEncoder: return "UnknownEncoder";
    case ErrorCode::EncoderLoadError: return "EncoderLoadError";
    case ErrorCode::DimError: return "DimError";
    case ErrorCode::LabelError: return "LabelError";
    case ErrorCode::EmptyConfusion: return "EmptyConfusion";
    case ErrorCode::EmptyReport: return "EmptyReport";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FileError: return "FileError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (batch runners, the HTTP layer, the CLI) can map it without
/// string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ironia
