// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "greenhouse/types.hpp"

namespace greenhouse {

/// An isochronous time series: values sampled at start_time + i * step.
/// Immutable after construction; the constructor rejects empty series,
/// non-positive steps and non-finite values.
class Series {
 public:
  Series(Timestamp start_time, Timestamp step, Vector values);

  Timestamp start_time() const noexcept { return start_time_; }
  Timestamp step() const noexcept { return step_; }
  const Vector& values() const noexcept { return values_; }
  Index size() const noexcept { return values_.size(); }
  Timestamp timestamp(Index i) const noexcept { return start_time_ + i * step_; }

 private:
  Timestamp start_time_;
  Timestamp step_;
  Vector values_;
};

/// z-score transform fitted on one series and reused verbatim elsewhere.
struct Normalizer {
  double mean = 0.0;
  double std = 1.0;
};

/// Fractions for the three contiguous training segments.
class SplitSpec {
 public:
  SplitSpec() : fractions_{0.5, 0.25, 0.25} {}
  SplitSpec(double first, double second, double third);

  const std::array<double, 3>& fractions() const noexcept { return fractions_; }

 private:
  std::array<double, 3> fractions_;
};

/// Reads `timestamp,value` CSV. The step is inferred from the first two rows
/// and every later row must land exactly on the grid. A single-row file gets
/// step 1 since no spacing can be inferred.
Series load_series_csv(const std::string& path);

void save_series_csv(const Series& s, const std::string& path);

/// Cuts s into three contiguous, order-preserving segments. Lengths are
/// floor(fraction * n) with the remainder going to the first segment.
/// Throws SegmentTooShort when a segment falls below min_segment_len.
std::array<Series, 3> split_contiguous(const Series& s, const SplitSpec& spec,
                                       Index min_segment_len = 1);

/// Sample mean / standard deviation (n-1). A near-constant series gets
/// std 1 and pushes a ConstantSeries note onto warnings.
Normalizer fit_normalizer(const Series& s, std::vector<std::string>* warnings = nullptr);

Series apply_normalizer(const Normalizer& n, const Series& s);
Series invert_normalizer(const Normalizer& n, const Series& s);

}  // namespace greenhouse
