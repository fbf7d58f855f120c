#pragma once

#include <stdexcept>
#include <string>

namespace biomass {

enum class ErrorCode {
  // input / validation
  MalformedRow,
  EmptyFile,
  UnsupportedFormat,
  DimensionMismatch,
  PadTooLarge,
  RasterLargerThanTarget,
  NonSquareRaster,
  MissingFile,
  InvalidManifest,
  InvalidDataset,
  TooFewFrames,
  NonPositiveMass,
  MissingSpeed,
  EmptyInput,
  TooFewRows,
  ShapeMismatch,
  MissingMetadata,
  MissingSecondView,
  EmptySplit,
  InvalidConfig,
  IncompatibleArchitecture,
  EmptyPredictions,
  TooFewEntries,
  TaxonTooSmall,
  DuplicateSpecimenAcrossFolds,
  LabelMismatch,
  UnknownTaxon,
  ModelMissing,
  NoResults,
  SilhouetteTooLarge,
  // numeric
  RankDeficient,
  NonFiniteLoss,
  NonPositiveTargetInLogSpace,
  ZeroVariance,
};

const char* to_string(ErrorCode code);

/// True for failures caused by numerics rather than by malformed input.
bool is_numeric(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace biomass
