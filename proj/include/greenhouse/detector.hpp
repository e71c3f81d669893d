// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "greenhouse/pipeline.hpp"
#include "greenhouse/series.hpp"
#include "greenhouse/types.hpp"

namespace greenhouse {

enum class PointStatus : std::uint8_t { unscored, normal, anomalous };

const char* to_string(PointStatus status);

/// One row per input point. The first B + F - 1 points lack a complete set of
/// predictions and stay unscored (m_distances holds NaN there); a scored point
/// is anomalous iff its M-distance strictly exceeds the threshold.
struct DetectionResult {
  std::vector<Timestamp> timestamps;
  Vector values;       // original (unnormalized) units
  Vector m_distances;  // NaN where unscored
  std::vector<PointStatus> status;
  double threshold = 0.0;
  double percentile = 0.0;
  Timestamp step = 1;

  Index size() const noexcept { return static_cast<Index>(status.size()); }
  Index scored_count() const noexcept;
  Index anomaly_count() const noexcept;
};

/// The inference phase: z-score with the bundle's normalizer, predict every
/// window, assemble error vectors, score them against the error model and
/// label the points whose M-distance exceeds tau.
DetectionResult detect(const ModelBundle& b, const Series& s);

/// CSV `timestamp,value,m_distance,status`; m_distance is empty on unscored
/// rows; reals at 17 significant digits, LF line endings.
void write_result_csv(const DetectionResult& r, const std::string& path);

/// Parses a file produced by write_result_csv. threshold/percentile are not
/// part of the CSV and come back as NaN.
DetectionResult read_result_csv(const std::string& path);

}  // namespace greenhouse
