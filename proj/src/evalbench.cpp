// SPDX-License-Identifier: Apache-2.0
#include "greenhouse/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "greenhouse/error.hpp"
#include "greenhouse/rng.hpp"

namespace greenhouse {

LabelSet LabelSet::make(std::vector<Timestamp> timestamps, Timestamp tolerance_steps) {
  if (tolerance_steps < 0) throw Error(ErrorCode::BadParams, "tolerance must be >= 0");
  std::sort(timestamps.begin(), timestamps.end());
  timestamps.erase(std::unique(timestamps.begin(), timestamps.end()), timestamps.end());
  LabelSet labels;
  labels.timestamps = std::move(timestamps);
  labels.tolerance_steps = tolerance_steps;
  return labels;
}

Metrics Metrics::from_counts(long tp, long fp, long fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw Error(ErrorCode::BadParams, "counts must be nonnegative");
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

Metrics score(const DetectionResult& r, const LabelSet& labels) {
  if (r.size() == 0) throw Error(ErrorCode::BadParams, "empty detection result");
  const Timestamp first = r.timestamps.front();
  const Timestamp last = r.timestamps.back();
  for (Timestamp ts : labels.timestamps) {
    if (ts < first || ts > last)
      throw Error(ErrorCode::LabelOutOfRange,
                  "label " + std::to_string(ts) + " outside [" + std::to_string(first) + ", " +
                      std::to_string(last) + "]");
  }

  const Timestamp window = labels.tolerance_steps * r.step;
  std::vector<bool> matched(labels.timestamps.size(), false);

  long tp = 0;
  long fp = 0;
  for (Index i = 0; i < r.size(); ++i) {
    if (r.status[i] != PointStatus::anomalous) continue;
    const Timestamp ts = r.timestamps[i];

    // nearest unmatched label within +/- window; ties go to the earlier label
    long best = -1;
    Timestamp best_dist = window + 1;
    auto it = std::lower_bound(labels.timestamps.begin(), labels.timestamps.end(), ts);
    const long pos = it - labels.timestamps.begin();
    for (long j = pos - 1; j >= 0; --j) {
      const Timestamp dist = ts - labels.timestamps[j];
      if (dist > window) break;
      if (!matched[j] && dist < best_dist) {
        best = j;
        best_dist = dist;
      }
    }
    for (long j = pos; j < static_cast<long>(labels.timestamps.size()); ++j) {
      const Timestamp dist = labels.timestamps[j] - ts;
      if (dist > window) break;
      if (!matched[j] && dist < best_dist) {
        best = j;
        best_dist = dist;
      }
    }
    if (best >= 0) {
      matched[best] = true;
      ++tp;
    } else {
      ++fp;
    }
  }

  const long fn = static_cast<long>(std::count(matched.begin(), matched.end(), false));
  return Metrics::from_counts(tp, fp, fn);
}

const char* to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::sine: return "sine";
    case SynthKind::sine_noise: return "sine+noise";
    case SynthKind::random_walk_drift: return "random-walk-with-drift";
  }
  return "sine";
}

SynthKind synth_kind_from_string(const std::string& name) {
  if (name == "sine") return SynthKind::sine;
  if (name == "sine+noise") return SynthKind::sine_noise;
  if (name == "random-walk-with-drift") return SynthKind::random_walk_drift;
  throw Error(ErrorCode::BadParams, "unknown generator kind '" + name + "'");
}

Series generate_synthetic(SynthKind kind, Index n, std::uint64_t seed,
                          const SynthParams& params) {
  if (n < 1) throw Error(ErrorCode::BadParams, "n must be >= 1");
  if (!(params.period > 0.0)) throw Error(ErrorCode::BadParams, "period must be > 0");
  if (!std::isfinite(params.amplitude)) throw Error(ErrorCode::BadParams, "amplitude must be finite");
  if (params.noise_std < 0.0) throw Error(ErrorCode::BadParams, "noise_std must be >= 0");
  if (params.step < 1) throw Error(ErrorCode::BadParams, "step must be >= 1");

  double noise = params.noise_std;
  if (kind == SynthKind::sine_noise && noise == 0.0) noise = 0.1;

  Rng rng(seed);
  Vector values(n);
  switch (kind) {
    case SynthKind::sine:
    case SynthKind::sine_noise:
      for (Index i = 0; i < n; ++i) {
        double v = params.amplitude * std::sin(2.0 * M_PI * static_cast<double>(i) / params.period);
        if (noise > 0.0) v += noise * rng.normal();
        values[i] = v;
      }
      break;
    case SynthKind::random_walk_drift: {
      double v = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (i > 0) {
          v += params.drift;
          if (noise > 0.0) v += noise * rng.normal();
        }
        values[i] = v;
      }
      break;
    }
  }
  return Series(params.start_time, params.step, std::move(values));
}

std::pair<Series, LabelSet> inject_anomalies(const Series& s, std::uint64_t seed,
                                             const SpikeSpec& spec) {
  if (spec.count < 1) throw Error(ErrorCode::BadParams, "count must be >= 1");
  if (!(spec.magnitude > 0.0)) throw Error(ErrorCode::BadParams, "magnitude must be > 0");
  if (spec.min_gap < 1) throw Error(ErrorCode::BadParams, "min_gap must be >= 1");
  if (spec.min_index < 1) throw Error(ErrorCode::BadParams, "min_index must be >= 1");
  if (spec.tolerance_steps < 0) throw Error(ErrorCode::BadParams, "tolerance must be >= 0");

  const Index n = s.size();
  if (n < 2) throw Error(ErrorCode::SeriesTooShort, "need at least 2 points to scale spikes");
  // positions p_1 < ... < p_c with p_1 >= min_index and gaps >= min_gap map to
  // distinct draws q_i from [0, range) via p_i = min_index + q_i + i*min_gap
  const Index range = n - (spec.count - 1) * spec.min_gap - spec.min_index + 1;
  if (range < spec.count)
    throw Error(ErrorCode::CannotPlace,
                "cannot place " + std::to_string(spec.count) + " spikes with gap >= " +
                    std::to_string(spec.min_gap) + " in " + std::to_string(n) + " points");

  Rng rng(seed);
  std::set<Index> draws;
  while (static_cast<Index>(draws.size()) < spec.count)
    draws.insert(static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(range))));

  std::vector<Index> positions;  // 1-based
  Index i = 0;
  for (Index q : draws) positions.push_back(spec.min_index + q + (i++) * spec.min_gap);

  const double mean = s.values().mean();
  const double std_dev =
      std::sqrt((s.values().array() - mean).square().sum() / static_cast<double>(n - 1));

  Vector values = s.values();
  std::vector<Timestamp> label_times;
  for (Index pos : positions) {
    const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    values[pos - 1] += sign * spec.magnitude * std_dev;
    label_times.push_back(s.timestamp(pos - 1));
  }

  return {Series(s.start_time(), s.step(), std::move(values)),
          LabelSet::make(std::move(label_times), spec.tolerance_steps)};
}

std::vector<BenchmarkRow> run_benchmark(const std::vector<BenchmarkDataset>& datasets,
                                        const PredictorConfig& cfg, const SplitSpec& split,
                                        const std::vector<double>& percentiles,
                                        PredictorKind kind) {
  if (percentiles.empty()) throw Error(ErrorCode::BadParams, "need at least one percentile");
  std::vector<BenchmarkRow> rows;
  for (const auto& ds : datasets) {
    const ModelBundle trained =
        train_pipeline(ds.train_series, cfg, split, percentiles.front(), kind);
    for (double rho : percentiles) {
      const ModelBundle bundle = with_percentile(trained, rho);
      const DetectionResult result = detect(bundle, ds.test_series);
      const Metrics m = score(result, ds.labels);
      BenchmarkRow row;
      row.dataset = ds.name;
      row.percentile = rho;
      row.tp = m.tp;
      row.fp = m.fp;
      row.fn = m.fn;
      row.precision = m.precision;
      row.recall = m.recall;
      row.f1 = m.f1;
      row.seed = cfg.seed;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::string format_report(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream out;
  out << "dataset,percentile,tp,fp,fn,precision,recall,f1,seed\n";
  for (const auto& row : rows) {
    out << row.dataset << ',' << format_real(row.percentile) << ',' << row.tp << ',' << row.fp
        << ',' << row.fn << ',' << format_real(row.precision) << ',' << format_real(row.recall)
        << ',' << format_real(row.f1) << ',' << row.seed << '\n';
  }
  return out.str();
}

std::vector<BenchmarkRow> parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingHeader, "empty report");
  strip_cr(line);
  if (line != "dataset,percentile,tp,fp,fn,precision,recall,f1,seed")
    throw Error(ErrorCode::MissingHeader, "unexpected report header");

  std::vector<BenchmarkRow> rows;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 9) throw Error(ErrorCode::MalformedCsv, "report row needs 9 fields");
    try {
      BenchmarkRow row;
      row.dataset = fields[0];
      row.percentile = std::stod(fields[1]);
      row.tp = std::stol(fields[2]);
      row.fp = std::stol(fields[3]);
      row.fn = std::stol(fields[4]);
      row.precision = std::stod(fields[5]);
      row.recall = std::stod(fields[6]);
      row.f1 = std::stod(fields[7]);
      row.seed = std::stoull(fields[8]);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedCsv, "bad number in report row");
    }
  }
  return rows;
}

LabelSet load_labels_csv(const std::string& path, Timestamp tolerance_steps) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingHeader, path + " is empty");
  strip_cr(line);
  if (line != "timestamp")
    throw Error(ErrorCode::MissingHeader, path + ": expected header 'timestamp'");

  std::vector<Timestamp> timestamps;
  Index row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    ++row;
    try {
      timestamps.push_back(std::stoll(line));
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedCsv,
                  path + ": bad timestamp at row " + std::to_string(row));
    }
  }
  return LabelSet::make(std::move(timestamps), tolerance_steps);
}

void save_labels_csv(const LabelSet& labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << "timestamp\n";
  for (Timestamp ts : labels.timestamps) out << ts << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

Series load_nab_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingHeader, path + " is empty");
  strip_cr(line);
  if (line != "timestamp,value")
    throw Error(ErrorCode::MissingHeader, path + ": expected header 'timestamp,value'");

  std::vector<double> values;
  Index row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    ++row;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorCode::MalformedCsv, path + ": row " + std::to_string(row) + " has no comma");
    const std::string value_text = line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(value_text, &used);
      if (used != value_text.size() || !std::isfinite(v))
        throw std::invalid_argument("trailing garbage");
      values.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::NonNumericValue, path + ": bad value at row " + std::to_string(row));
    }
  }
  if (values.empty()) throw Error(ErrorCode::EmptySeries, path + " has no data rows");
  Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  return Series(0, 1, std::move(v));
}

}  // namespace greenhouse
