// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace greenhouse {

enum class ErrorCode {
  // I/O and series ingestion
  IoFailure,
  MissingHeader,
  EmptySeries,
  NonMonotonicTimestamps,
  IrregularSpacing,
  NonNumericValue,
  SeriesTooShort,
  SegmentTooShort,
  BadParams,
  // predictors
  WrongWindowLength,
  NonFiniteActivation,
  DivergedTraining,
  // distribution fitting and scoring
  TooFewSamples,
  CholeskyFailure,
  DimensionMismatch,
  PercentileOutOfRange,
  NegativeDistance,
  // model bundle persistence
  SchemaVersionMismatch,
  MalformedBundle,
  BundleDimensionMismatch,
  // evaluation
  MalformedCsv,
  LabelOutOfRange,
  CannotPlace,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace greenhouse
