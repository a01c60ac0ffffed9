#pragma once

#include <stdexcept>
#include <string>

namespace fairflow {

enum class Errc {
  // tabular
  MissingColumn,
  TypeViolation,
  EmptyDataset,
  LabelNotBinary,
  UnmappedSplitValue,
  DegenerateSplit,
  InvalidFractions,
  // audit
  UnknownGroup,
  UnknownMetric,
  // methods
  NotFitted,
  NonFiniteLoss,
  EmptyGroupAtFit,
  NoPositivesInGroup,
  InvalidHyperparameter,
  // hyperopt
  GridTooSmall,
  InfiniteGrid,
  TrialFailed,
  // experiment / config
  SchemaError,
  UnknownKind,
  DuplicateName,
  DatasetLoadError,
  StoreExists,
  TooFewTrials,
  // io
  IoError,
  ParseError,
  Unsupported,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::TypeViolation: return "TypeViolation";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::LabelNotBinary: return "LabelNotBinary";
    case Errc::UnmappedSplitValue: return "UnmappedSplitValue";
    case Errc::DegenerateSplit: return "DegenerateSplit";
    case Errc::InvalidFractions: return "InvalidFractions";
    case Errc::UnknownGroup: return "UnknownGroup";
    case Errc::UnknownMetric: return "UnknownMetric";
    case Errc::NotFitted: return "NotFitted";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptyGroupAtFit: return "EmptyGroupAtFit";
    case Errc::NoPositivesInGroup: return "NoPositivesInGroup";
    case Errc::InvalidHyperparameter: return "InvalidHyperparameter";
    case Errc::GridTooSmall: return "GridTooSmall";
    case Errc::InfiniteGrid: return "InfiniteGrid";
    case Errc::TrialFailed: return "TrialFailed";
    case Errc::SchemaError: return "SchemaError";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::DatasetLoadError: return "DatasetLoadError";
    case Errc::StoreExists: return "StoreExists";
    case Errc::TooFewTrials: return "TooFewTrials";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
    case Errc::Unsupported: return "Unsupported";
  }
  return "Unknown";
}

/// Library-wide exception. `code()` identifies the contract violation;
/// `what()` carries the human-readable detail (field paths, row numbers, ...).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fairflow
