#include "biomass/error.hpp"

namespace biomass {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PadTooLarge: return "PadTooLarge";
    case ErrorCode::RasterLargerThanTarget: return "RasterLargerThanTarget";
    case ErrorCode::NonSquareRaster: return "NonSquareRaster";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::NonPositiveMass: return "NonPositiveMass";
    case ErrorCode::MissingSpeed: return "MissingSpeed";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingMetadata: return "MissingMetadata";
    case ErrorCode::MissingSecondView: return "MissingSecondView";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IncompatibleArchitecture: return "IncompatibleArchitecture";
    case ErrorCode::EmptyPredictions: return "EmptyPredictions";
    case ErrorCode::TooFewEntries: return "TooFewEntries";
    case ErrorCode::TaxonTooSmall: return "TaxonTooSmall";
    case ErrorCode::DuplicateSpecimenAcrossFolds: return "DuplicateSpecimenAcrossFolds";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::UnknownTaxon: return "UnknownTaxon";
    case ErrorCode::ModelMissing: return "ModelMissing";
    case ErrorCode::NoResults: return "NoResults";
    case ErrorCode::SilhouetteTooLarge: return "SilhouetteTooLarge";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonPositiveTargetInLogSpace: return "NonPositiveTargetInLogSpace";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
  }
  return "Unknown";
}

bool is_numeric(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonPositiveTargetInLogSpace:
    case ErrorCode::ZeroVariance:
      return true;
    default:
      return false;
  }
}

}  // namespace biomass
