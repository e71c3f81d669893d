// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "greenhouse/predictor.hpp"
#include "greenhouse/series.hpp"
#include "greenhouse/stats.hpp"
#include "greenhouse/types.hpp"

namespace greenhouse {

/// Dense store of the sliding-window predictions p(t, k): the k-th prediction
/// of the value at time t, where k counts the windows that predict t in
/// sliding order (k = 1 is the earliest window, i.e. the longest horizon).
/// Time indices t and prediction indices k are 1-based to match that
/// notation. p(t, k) is stored iff B + k <= t <= n, so every time point from
/// B + F onward carries exactly F predictions.
class PredictionMatrix {
 public:
  PredictionMatrix(Index n, Index lookback, Index horizon);

  Index size() const noexcept { return values_.rows(); }
  Index lookback() const noexcept { return lookback_; }
  Index horizon() const noexcept { return horizon_; }

  bool has(Index t, Index k) const;
  double at(Index t, Index k) const;
  void set(Index t, Index k, double value);

  /// First time index with a full set of F predictions: B + F.
  Index first_scored() const noexcept { return lookback_ + horizon_; }
  /// max(0, n - B - F + 1)
  Index fully_predicted_count() const noexcept;

 private:
  Index lookback_;
  Index horizon_;
  Matrix values_;   // n x horizon, row t-1 holds p(t, .)
  BoolArray mask_;  // same shape; true where a prediction exists
};

/// Error vectors e(t)[k-1] = p(t, k) - v_t for every fully predicted time
/// point, in ascending t. vectors.row(i) belongs to time index
/// first_time_index + i (1-based).
struct ErrorVectorSet {
  Matrix vectors;  // (n - B - F + 1) x horizon
  Index first_time_index = 0;
};

/// Applies the model over every window of s and scatters the outputs into
/// the sliding-window pattern. Windows are evaluated sequentially so results
/// match a per-window predict() loop exactly.
PredictionMatrix predict_all(const PredictorModel& m, const Series& s);

ErrorVectorSet error_vectors(const PredictionMatrix& pm, const Series& s);

/// Everything the inference phase needs, produced by one training run.
struct ModelBundle {
  std::string schema_version = "greenhouse-bundle/1";
  PredictorModel model;
  Normalizer normalizer;
  MultivariateNormal error_model;    // N, fitted on segment-2 error vectors
  TruncatedNormal threshold_model;   // T, fitted on segment-3 M-distances
  double threshold = 0.0;            // tau = truncated_quantile(T, percentile)
  double percentile = 0.99;          // rho
  SplitSpec split;
};

struct PipelineStats {
  std::array<Index, 3> segment_sizes{0, 0, 0};
  TrainStats training;
};

/// The four training steps over one anomaly-free series: contiguous split,
/// predictor training on segment 1 (z-scored with segment-1 statistics),
/// error-distribution fit on segment 2, threshold calibration on segment 3.
/// Component errors are rethrown with the pipeline step prepended.
ModelBundle train_pipeline(const Series& s, const PredictorConfig& cfg, const SplitSpec& split,
                           double percentile, PredictorKind kind,
                           std::vector<std::string>* warnings = nullptr,
                           PipelineStats* stats = nullptr);

/// Same trained M, N and T; only rho and tau change.
ModelBundle with_percentile(const ModelBundle& b, double percentile);

/// Writes the bundle as a schema-versioned JSON document with every real
/// number at 17 significant digits (lossless for IEEE doubles) and a fixed
/// field order, so identical bundles serialize to identical bytes.
void save_bundle(const ModelBundle& b, const std::string& path);

ModelBundle load_bundle(const std::string& path);

}  // namespace greenhouse
