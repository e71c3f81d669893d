// SPDX-License-Identifier: Apache-2.0
#include "greenhouse/series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "greenhouse/error.hpp"

namespace greenhouse {

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_timestamp(const std::string& text, Timestamp& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !text.empty();
}

bool parse_value(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) return false;
  return std::isfinite(out);
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Series::Series(Timestamp start_time, Timestamp step, Vector values)
    : start_time_(start_time), step_(step), values_(std::move(values)) {
  if (step_ <= 0) throw Error(ErrorCode::BadParams, "series step must be positive");
  if (values_.size() == 0) throw Error(ErrorCode::EmptySeries, "series must contain at least one value");
  if (!values_.allFinite())
    throw Error(ErrorCode::NonNumericValue, "series values must be finite");
}

SplitSpec::SplitSpec(double first, double second, double third)
    : fractions_{first, second, third} {
  for (double f : fractions_) {
    if (!(f > 0.0))
      throw Error(ErrorCode::BadParams, "split fractions must be positive");
  }
  const double sum = first + second + third;
  if (std::abs(sum - 1.0) > 1e-12)
    throw Error(ErrorCode::BadParams, "split fractions must sum to 1");
}

Series load_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingHeader, path + " is empty");
  strip_cr(line);
  if (line != "timestamp,value")
    throw Error(ErrorCode::MissingHeader, path + ": expected header 'timestamp,value'");

  std::vector<Timestamp> timestamps;
  std::vector<double> values;
  Index row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    ++row;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(ErrorCode::MalformedCsv, path + ": row " + std::to_string(row) + " has no comma");
    Timestamp ts = 0;
    double v = 0.0;
    if (!parse_timestamp(line.substr(0, comma), ts))
      throw Error(ErrorCode::NonNumericValue,
                  path + ": bad timestamp at row " + std::to_string(row));
    if (!parse_value(line.substr(comma + 1), v))
      throw Error(ErrorCode::NonNumericValue, path + ": bad value at row " + std::to_string(row));
    timestamps.push_back(ts);
    values.push_back(v);
  }
  if (values.empty()) throw Error(ErrorCode::EmptySeries, path + " has no data rows");

  const Timestamp start = timestamps.front();
  Timestamp step = 1;  // single-row files carry no spacing information
  if (timestamps.size() > 1) {
    step = timestamps[1] - timestamps[0];
    if (step <= 0)
      throw Error(ErrorCode::NonMonotonicTimestamps, path + ": timestamps not increasing at row 2");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    const Timestamp delta = timestamps[i] - timestamps[i - 1];
    if (delta <= 0)
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  path + ": timestamps not increasing at row " + std::to_string(i + 1));
    if (delta != step)
      throw Error(ErrorCode::IrregularSpacing,
                  path + ": spacing breaks at row " + std::to_string(i + 1) + " (expected step " +
                      std::to_string(step) + ", got " + std::to_string(delta) + ")");
  }

  Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  return Series(start, step, std::move(v));
}

void save_series_csv(const Series& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << "timestamp,value\n";
  for (Index i = 0; i < s.size(); ++i)
    out << s.timestamp(i) << ',' << format_real(s.values()[i]) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

std::array<Series, 3> split_contiguous(const Series& s, const SplitSpec& spec,
                                       Index min_segment_len) {
  const Index n = s.size();
  const auto& f = spec.fractions();
  std::array<Index, 3> len{static_cast<Index>(std::floor(f[0] * static_cast<double>(n))),
                           static_cast<Index>(std::floor(f[1] * static_cast<double>(n))),
                           static_cast<Index>(std::floor(f[2] * static_cast<double>(n)))};
  len[0] += n - (len[0] + len[1] + len[2]);  // remainder goes to the first segment

  for (int i = 0; i < 3; ++i) {
    if (len[i] < std::max<Index>(min_segment_len, 1))
      throw Error(ErrorCode::SegmentTooShort,
                  "segment " + std::to_string(i + 1) + " has " + std::to_string(len[i]) +
                      " points, needs at least " + std::to_string(min_segment_len));
  }

  std::array<Index, 3> begin{0, len[0], len[0] + len[1]};
  auto make_segment = [&](int i) {
    return Series(s.start_time() + begin[i] * s.step(), s.step(),
                  s.values().segment(begin[i], len[i]));
  };
  return {make_segment(0), make_segment(1), make_segment(2)};
}

Normalizer fit_normalizer(const Series& s, std::vector<std::string>* warnings) {
  if (s.size() < 2)
    throw Error(ErrorCode::SeriesTooShort, "normalizer needs at least 2 points");
  const double mean = s.values().mean();
  const double var = (s.values().array() - mean).square().sum() / static_cast<double>(s.size() - 1);
  double std = std::sqrt(var);
  if (std < 1e-12) {
    std = 1.0;
    if (warnings) warnings->push_back("ConstantSeries: standard deviation below 1e-12, using 1");
  }
  return Normalizer{mean, std};
}

Series apply_normalizer(const Normalizer& n, const Series& s) {
  return Series(s.start_time(), s.step(), (s.values().array() - n.mean) / n.std);
}

Series invert_normalizer(const Normalizer& n, const Series& s) {
  return Series(s.start_time(), s.step(), s.values().array() * n.std + n.mean);
}

}  // namespace greenhouse
