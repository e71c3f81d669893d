// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "greenhouse/detector.hpp"
#include "greenhouse/pipeline.hpp"
#include "greenhouse/series.hpp"
#include "greenhouse/types.hpp"

namespace greenhouse {

/// Ground-truth anomalous timestamps plus the match window (in steps) used
/// when pairing detections with labels.
struct LabelSet {
  std::vector<Timestamp> timestamps;  // sorted, unique
  Timestamp tolerance_steps = 0;

  static LabelSet make(std::vector<Timestamp> timestamps, Timestamp tolerance_steps);
};

struct Metrics {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static Metrics from_counts(long tp, long fp, long fn);
};

/// Greedy one-to-one matching in time order: each detected anomaly takes the
/// nearest unmatched label within +/- tolerance steps (ties to the earlier
/// label). Labels must lie inside the result's time range.
Metrics score(const DetectionResult& r, const LabelSet& labels);

enum class SynthKind { sine, sine_noise, random_walk_drift };

const char* to_string(SynthKind kind);
SynthKind synth_kind_from_string(const std::string& name);

struct SynthParams {
  double amplitude = 1.0;
  double period = 50.0;
  double noise_std = 0.0;  // sine_noise defaults to 0.1 when left at 0
  double drift = 0.0;
  Timestamp start_time = 0;
  Timestamp step = 1;
};

/// Deterministic generators:
///   sine:               v_i = amplitude * sin(2*pi*i / period) + noise_std * g_i
///   sine_noise:         same with noise_std > 0 (default 0.1)
///   random_walk_drift:  v_0 = 0, v_i = v_{i-1} + drift + noise_std * g_i
/// with g_i standard normal draws from the seeded generator.
Series generate_synthetic(SynthKind kind, Index n, std::uint64_t seed,
                          const SynthParams& params = {});

struct SpikeSpec {
  Index count = 1;
  double magnitude = 10.0;       // in units of the series' sample std
  Index min_gap = 1;             // minimum index distance between spikes
  Index min_index = 1;           // first eligible 1-based position (B + F)
  Timestamp tolerance_steps = 0; // recorded on the returned LabelSet
};

/// Adds `count` point spikes of magnitude * std(series) with seeded signs at
/// seeded positions >= min_index and pairwise gaps >= min_gap. Returns the
/// modified series and the spike timestamps as labels.
std::pair<Series, LabelSet> inject_anomalies(const Series& s, std::uint64_t seed,
                                             const SpikeSpec& spec);

struct BenchmarkDataset {
  std::string name;
  Series train_series;
  Series test_series;
  LabelSet labels;
};

struct BenchmarkRow {
  std::string dataset;
  double percentile = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t seed = 0;
};

/// Trains once per dataset on the clean series, then detects on the labeled
/// series at every percentile (tau is recalibrated from the same T).
std::vector<BenchmarkRow> run_benchmark(const std::vector<BenchmarkDataset>& datasets,
                                        const PredictorConfig& cfg, const SplitSpec& split,
                                        const std::vector<double>& percentiles,
                                        PredictorKind kind);

/// CSV report `dataset,percentile,tp,fp,fn,precision,recall,f1,seed`;
/// format/parse round-trip exactly.
std::string format_report(const std::vector<BenchmarkRow>& rows);
std::vector<BenchmarkRow> parse_report(const std::string& text);

/// Label CSV: header `timestamp`, one anomalous timestamp per row.
LabelSet load_labels_csv(const std::string& path, Timestamp tolerance_steps);
void save_labels_csv(const LabelSet& labels, const std::string& path);

/// Loads a Numenta-benchmark-style CSV (`timestamp,value` with datetime
/// strings). Rows are remapped onto the integer grid 0, 1, 2, ... since the
/// datasets are evenly spaced; date parsing is deliberately avoided.
Series load_nab_csv(const std::string& path);

}  // namespace greenhouse
