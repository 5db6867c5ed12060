#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sadi {

enum class ErrorKind {
  MalformedContainer,
  ShapeMismatch,
  MissingTensor,
  SequenceTooLong,
  TokenOutOfRange,
  TemplateSlotMissing,
  UnknownTemplate,
  IoFailure,
  HeterogeneousBatch,
  EmptyBatch,
  KOutOfRange,
  CorruptMaskFile,
  LengthMismatch,
  LayoutMismatch,
  EmptyDataset,
  HeterogeneousMasks,
  MalformedDataset,
  UnknownKey,
  MissingRequired,
  TypeError,
  InvalidArgument,
};

std::string_view error_kind_name(ErrorKind kind);

// Every module error surfaces as this exception; the CLI serializes
// kind() and what() into {error_kind, detail}.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedContainer: return "MalformedContainer";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::MissingTensor: return "MissingTensor";
    case ErrorKind::SequenceTooLong: return "SequenceTooLong";
    case ErrorKind::TokenOutOfRange: return "TokenOutOfRange";
    case ErrorKind::TemplateSlotMissing: return "TemplateSlotMissing";
    case ErrorKind::UnknownTemplate: return "UnknownTemplate";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::HeterogeneousBatch: return "HeterogeneousBatch";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::KOutOfRange: return "KOutOfRange";
    case ErrorKind::CorruptMaskFile: return "CorruptMaskFile";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::LayoutMismatch: return "LayoutMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::HeterogeneousMasks: return "HeterogeneousMasks";
    case ErrorKind::MalformedDataset: return "MalformedDataset";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::MissingRequired: return "MissingRequired";
    case ErrorKind::TypeError: return "TypeError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace sadi
