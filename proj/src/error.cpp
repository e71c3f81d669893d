// SPDX-License-Identifier: Apache-2.0
#include "greenhouse/error.hpp"

namespace greenhouse {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MissingHeader: return "MissingHeader";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::IrregularSpacing: return "IrregularSpacing";
    case ErrorCode::NonNumericValue: return "NonNumericValue";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::SegmentTooShort: return "SegmentTooShort";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::WrongWindowLength: return "WrongWindowLength";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::DivergedTraining: return "DivergedTraining";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::CholeskyFailure: return "CholeskyFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PercentileOutOfRange: return "PercentileOutOfRange";
    case ErrorCode::NegativeDistance: return "NegativeDistance";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::MalformedBundle: return "MalformedBundle";
    case ErrorCode::BundleDimensionMismatch: return "BundleDimensionMismatch";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::CannotPlace: return "CannotPlace";
  }
  return "UnknownError";
}

}  // namespace greenhouse
