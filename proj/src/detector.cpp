// SPDX-License-Identifier: Apache-2.0
#include "greenhouse/detector.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "greenhouse/error.hpp"
#include "greenhouse/stats.hpp"

namespace greenhouse {

const char* to_string(PointStatus status) {
  switch (status) {
    case PointStatus::unscored: return "unscored";
    case PointStatus::normal: return "normal";
    case PointStatus::anomalous: return "anomalous";
  }
  return "unscored";
}

Index DetectionResult::scored_count() const noexcept {
  Index n = 0;
  for (PointStatus st : status)
    if (st != PointStatus::unscored) ++n;
  return n;
}

Index DetectionResult::anomaly_count() const noexcept {
  Index n = 0;
  for (PointStatus st : status)
    if (st == PointStatus::anomalous) ++n;
  return n;
}

DetectionResult detect(const ModelBundle& b, const Series& s) {
  const Index lookback = b.model.config.lookback;
  const Index horizon = b.model.config.horizon;
  if (b.error_model.dimension != horizon)
    throw Error(ErrorCode::BundleDimensionMismatch,
                "error model dimension " + std::to_string(b.error_model.dimension) +
                    " does not match horizon " + std::to_string(horizon));
  if (s.size() < lookback + horizon)
    throw Error(ErrorCode::SeriesTooShort,
                "need at least " + std::to_string(lookback + horizon) + " points, got " +
                    std::to_string(s.size()));

  const Series normalized = apply_normalizer(b.normalizer, s);
  const PredictionMatrix pm = predict_all(b.model, normalized);
  const ErrorVectorSet ev = error_vectors(pm, normalized);

  const Index n = s.size();
  DetectionResult r;
  r.timestamps.resize(n);
  r.values = s.values();
  r.m_distances = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  r.status.assign(n, PointStatus::unscored);
  r.threshold = b.threshold;
  r.percentile = b.percentile;
  r.step = s.step();
  for (Index i = 0; i < n; ++i) r.timestamps[i] = s.timestamp(i);

  for (Index i = 0; i < ev.vectors.rows(); ++i) {
    const Index t = ev.first_time_index + i;  // 1-based
    const double d = mahalanobis(b.error_model, ev.vectors.row(i).transpose());
    r.m_distances[t - 1] = d;
    // "exceed" is strict: a distance equal to tau stays normal
    r.status[t - 1] = d > b.threshold ? PointStatus::anomalous : PointStatus::normal;
  }
  return r;
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

}  // namespace

void write_result_csv(const DetectionResult& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << "timestamp,value,m_distance,status\n";
  for (Index i = 0; i < r.size(); ++i) {
    out << r.timestamps[i] << ',' << format_real(r.values[i]) << ',';
    if (r.status[i] != PointStatus::unscored) out << format_real(r.m_distances[i]);
    out << ',' << to_string(r.status[i]) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

DetectionResult read_result_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingHeader, path + " is empty");
  strip_cr(line);
  if (line != "timestamp,value,m_distance,status")
    throw Error(ErrorCode::MissingHeader,
                path + ": expected header 'timestamp,value,m_distance,status'");

  DetectionResult r;
  r.threshold = std::numeric_limits<double>::quiet_NaN();
  r.percentile = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values;
  std::vector<double> distances;

  Index row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    ++row;
    std::array<std::string, 4> fields;
    std::size_t start = 0;
    for (int f = 0; f < 3; ++f) {
      const auto comma = line.find(',', start);
      if (comma == std::string::npos)
        throw Error(ErrorCode::MalformedCsv,
                    path + ": row " + std::to_string(row) + " has too few fields");
      fields[f] = line.substr(start, comma - start);
      start = comma + 1;
    }
    fields[3] = line.substr(start);

    try {
      r.timestamps.push_back(std::stoll(fields[0]));
      values.push_back(std::stod(fields[1]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedCsv, path + ": bad number at row " + std::to_string(row));
    }

    PointStatus st;
    if (fields[3] == "unscored") st = PointStatus::unscored;
    else if (fields[3] == "normal") st = PointStatus::normal;
    else if (fields[3] == "anomalous") st = PointStatus::anomalous;
    else
      throw Error(ErrorCode::MalformedCsv,
                  path + ": unknown status '" + fields[3] + "' at row " + std::to_string(row));
    r.status.push_back(st);

    if (st == PointStatus::unscored) {
      if (!fields[2].empty())
        throw Error(ErrorCode::MalformedCsv,
                    path + ": unscored row " + std::to_string(row) + " carries a distance");
      distances.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      try {
        distances.push_back(std::stod(fields[2]));
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedCsv,
                    path + ": bad m_distance at row " + std::to_string(row));
      }
    }
  }
  if (r.timestamps.empty()) throw Error(ErrorCode::EmptySeries, path + " has no data rows");

  r.values = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  r.m_distances = Eigen::Map<const Vector>(distances.data(), static_cast<Index>(distances.size()));
  r.step = r.timestamps.size() > 1 ? r.timestamps[1] - r.timestamps[0] : 1;
  if (r.step <= 0)
    throw Error(ErrorCode::NonMonotonicTimestamps, path + ": timestamps not increasing");
  return r;
}

}  // namespace greenhouse
