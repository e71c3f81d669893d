// SPDX-License-Identifier: Apache-2.0
#include "greenhouse/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "greenhouse/error.hpp"
#include "greenhouse/stats.hpp"

namespace greenhouse {

PredictionMatrix::PredictionMatrix(Index n, Index lookback, Index horizon)
    : lookback_(lookback),
      horizon_(horizon),
      values_(Matrix::Zero(n, horizon)),
      mask_(BoolArray::Constant(n, horizon, false)) {}

bool PredictionMatrix::has(Index t, Index k) const {
  if (t < 1 || t > values_.rows() || k < 1 || k > horizon_) return false;
  return mask_(t - 1, k - 1);
}

double PredictionMatrix::at(Index t, Index k) const {
  if (!has(t, k))
    throw Error(ErrorCode::BadParams, "no prediction stored at t=" + std::to_string(t) +
                                          ", k=" + std::to_string(k));
  return values_(t - 1, k - 1);
}

void PredictionMatrix::set(Index t, Index k, double value) {
  values_(t - 1, k - 1) = value;
  mask_(t - 1, k - 1) = true;
}

Index PredictionMatrix::fully_predicted_count() const noexcept {
  return std::max<Index>(0, values_.rows() - lookback_ - horizon_ + 1);
}

PredictionMatrix predict_all(const PredictorModel& m, const Series& s) {
  const Index n = s.size();
  const Index lookback = m.config.lookback;
  const Index horizon = m.config.horizon;
  if (n < lookback + horizon)
    throw Error(ErrorCode::SeriesTooShort,
                "need at least " + std::to_string(lookback + horizon) + " points, got " +
                    std::to_string(n));

  PredictionMatrix pm(n, lookback, horizon);
  // Window starting at 1-based j covers [v_j .. v_{j+B-1}] and its output
  // component m predicts time j+B-1+m. The k in p(t, k) counts the windows
  // that predict t in sliding order, so k = j - max(1, t-B-F+1) + 1.
  for (Index j = 1; j + lookback <= n; ++j) {
    Vector out = predict(m, s.values().segment(j - 1, lookback));
    for (Index pos = 1; pos <= horizon; ++pos) {
      const Index t = j + lookback - 1 + pos;
      if (t > n) break;
      const Index k = j - std::max<Index>(1, t - lookback - horizon + 1) + 1;
      pm.set(t, k, out[pos - 1]);
    }
  }
  return pm;
}

ErrorVectorSet error_vectors(const PredictionMatrix& pm, const Series& s) {
  const Index horizon = pm.horizon();
  const Index first = pm.first_scored();
  const Index count = pm.fully_predicted_count();

  ErrorVectorSet ev;
  ev.first_time_index = first;
  ev.vectors.resize(count, horizon);
  for (Index i = 0; i < count; ++i) {
    const Index t = first + i;
    for (Index k = 1; k <= horizon; ++k) ev.vectors(i, k - 1) = pm.at(t, k) - s.values()[t - 1];
  }
  return ev;
}

namespace {

template <typename Fn>
auto pipeline_step(int number, const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "step " + std::to_string(number) + " (" + name + "): " + e.what());
  }
}

}  // namespace

ModelBundle train_pipeline(const Series& s, const PredictorConfig& cfg, const SplitSpec& split,
                           double percentile, PredictorKind kind,
                           std::vector<std::string>* warnings, PipelineStats* stats) {
  cfg.validate();
  if (!(percentile > 0.0 && percentile < 1.0))
    throw Error(ErrorCode::PercentileOutOfRange, "percentile must lie strictly inside (0,1)");

  const Index min_len = cfg.lookback + cfg.horizon;

  auto segments = pipeline_step(1, "split", [&] { return split_contiguous(s, split, min_len); });
  if (stats)
    stats->segment_sizes = {segments[0].size(), segments[1].size(), segments[2].size()};

  ModelBundle bundle;
  bundle.split = split;
  bundle.percentile = percentile;

  bundle.normalizer =
      pipeline_step(1, "normalize", [&] { return fit_normalizer(segments[0], warnings); });
  const Series train_segment = apply_normalizer(bundle.normalizer, segments[0]);
  const Series fit_segment = apply_normalizer(bundle.normalizer, segments[1]);
  const Series calib_segment = apply_normalizer(bundle.normalizer, segments[2]);

  bundle.model = pipeline_step(2, "train predictor", [&] {
    return train(kind, train_segment, cfg, stats ? &stats->training : nullptr);
  });

  bundle.error_model = pipeline_step(3, "fit error distribution", [&] {
    const ErrorVectorSet ev = error_vectors(predict_all(bundle.model, fit_segment), fit_segment);
    return fit_mvn(ev.vectors);
  });

  pipeline_step(4, "calibrate threshold", [&] {
    const ErrorVectorSet ev =
        error_vectors(predict_all(bundle.model, calib_segment), calib_segment);
    Vector distances(ev.vectors.rows());
    for (Index i = 0; i < ev.vectors.rows(); ++i)
      distances[i] = mahalanobis(bundle.error_model, ev.vectors.row(i).transpose());
    bundle.threshold_model = fit_truncated_normal(distances, warnings);
    bundle.threshold = truncated_quantile(bundle.threshold_model, percentile);
    return 0;
  });

  return bundle;
}

ModelBundle with_percentile(const ModelBundle& b, double percentile) {
  ModelBundle out = b;
  out.percentile = percentile;
  out.threshold = truncated_quantile(out.threshold_model, percentile);
  return out;
}

// ---------------------------------------------------------------------------
// bundle persistence
//
// The writer emits the JSON itself with a fixed field order and %.17g reals,
// so saving the same bundle always produces the same bytes and every double
// survives the round-trip exactly. Parsing goes through nlohmann::json.
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kSchemaVersion = "greenhouse-bundle/1";

std::string real_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class JsonWriter {
 public:
  explicit JsonWriter(std::ostream& out) : out_(out) {}

  void begin_object() { open('{'); }
  void end_object() { close('}'); }
  void begin_array(const std::string& key) {
    comma();
    indent();
    out_ << '"' << key << "\": [";
    first_ = true;
    ++depth_;
  }
  void end_array() {
    --depth_;
    out_ << ']';
    first_ = false;
  }

  void key(const std::string& name) {
    comma();
    indent();
    out_ << '"' << name << "\": ";
    first_ = true;  // value follows without comma
  }
  void string_value(const std::string& v) {
    out_ << '"' << v << '"';
    first_ = false;
  }
  void raw_value(const std::string& v) {
    out_ << v;
    first_ = false;
  }
  void array_item(const std::string& v) {
    if (!first_) out_ << ", ";
    out_ << v;
    first_ = false;
  }

  void field(const std::string& name, const std::string& quoted) {
    key(name);
    string_value(quoted);
  }
  void field_real(const std::string& name, double v) {
    key(name);
    raw_value(real_str(v));
  }
  void field_int(const std::string& name, long long v) {
    key(name);
    raw_value(std::to_string(v));
  }
  void field_uint(const std::string& name, unsigned long long v) {
    key(name);
    raw_value(std::to_string(v));
  }

  void field_vector(const std::string& name, const Vector& v) {
    begin_array(name);
    for (Index i = 0; i < v.size(); ++i) array_item(real_str(v[i]));
    end_array();
  }
  void field_matrix(const std::string& name, const Matrix& m) {
    begin_array(name);
    for (Index r = 0; r < m.rows(); ++r) {
      if (!first_) out_ << ", ";
      first_ = true;
      out_ << '[';
      for (Index c = 0; c < m.cols(); ++c) array_item(real_str(m(r, c)));
      out_ << ']';
      first_ = false;
    }
    end_array();
  }

  void key_object(const std::string& name) {
    key(name);
    out_ << '{';
    ++depth_;
    first_ = true;
  }
  void close_object() { close('}'); }

 private:
  void open(char ch) {
    out_ << ch;
    ++depth_;
    first_ = true;
  }
  void close(char ch) {
    --depth_;
    out_ << '\n';
    for (int i = 0; i < depth_; ++i) out_ << "  ";
    out_ << ch;
    first_ = false;
  }
  void comma() {
    if (!first_) out_ << ',';
  }
  void indent() {
    out_ << '\n';
    for (int i = 0; i < depth_; ++i) out_ << "  ";
  }

  std::ostream& out_;
  int depth_ = 0;
  bool first_ = true;
};

void write_lstm(JsonWriter& w, const LstmParams& p) {
  w.key_object("lstm");
  w.field_matrix("w_input", p.w_input);
  w.field_matrix("w_forget", p.w_forget);
  w.field_matrix("w_output", p.w_output);
  w.field_matrix("w_candidate", p.w_candidate);
  w.field_vector("b_input", p.b_input);
  w.field_vector("b_forget", p.b_forget);
  w.field_vector("b_output", p.b_output);
  w.field_vector("b_candidate", p.b_candidate);
  w.field_matrix("w_proj", p.w_proj);
  w.field_vector("b_proj", p.b_proj);
  w.close_object();
}

void write_ar(JsonWriter& w, const ArParams& p) {
  w.key_object("linear_ar");
  w.field_matrix("coeff", p.coeff);
  w.field_vector("intercept", p.intercept);
  w.close_object();
}

using nlohmann::json;

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::MalformedBundle, "expected array of reals");
  Vector v(static_cast<Index>(j.size()));
  Index i = 0;
  for (const auto& item : j) {
    if (!item.is_number()) throw Error(ErrorCode::MalformedBundle, "expected real number");
    v[i++] = item.get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw Error(ErrorCode::MalformedBundle, "expected non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  Index r = 0;
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw Error(ErrorCode::MalformedBundle, "ragged matrix rows");
    Index c = 0;
    for (const auto& item : row) {
      if (!item.is_number()) throw Error(ErrorCode::MalformedBundle, "expected real number");
      m(r, c++) = item.get<double>();
    }
    ++r;
  }
  return m;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end())
    throw Error(ErrorCode::MalformedBundle, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

void save_bundle(const ModelBundle& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");

  JsonWriter w(out);
  w.begin_object();
  w.field("schema_version", b.schema_version);
  w.field_real("percentile", b.percentile);
  w.field_real("threshold", b.threshold);

  w.begin_array("split_fractions");
  for (double f : b.split.fractions()) w.array_item(real_str(f));
  w.end_array();

  w.key_object("config");
  const PredictorConfig& cfg = b.model.config;
  w.field("kind", to_string(b.model.kind));
  w.field_int("lookback", cfg.lookback);
  w.field_int("horizon", cfg.horizon);
  w.field_int("hidden_size", cfg.hidden_size);
  w.field_int("epochs", cfg.epochs);
  w.field_real("learning_rate", cfg.learning_rate);
  w.field_int("batch_size", cfg.batch_size);
  w.field_real("grad_clip", cfg.grad_clip);
  w.field_uint("seed", cfg.seed);
  w.close_object();

  w.key_object("normalizer");
  w.field_real("mean", b.normalizer.mean);
  w.field_real("std", b.normalizer.std);
  w.close_object();

  w.key_object("predictor");
  if (b.model.kind == PredictorKind::lstm)
    write_lstm(w, b.model.lstm());
  else
    write_ar(w, b.model.ar());
  w.close_object();

  w.key_object("error_model");
  w.field_int("dimension", b.error_model.dimension);
  w.field_vector("mean", b.error_model.mean);
  w.field_matrix("covariance", b.error_model.covariance);
  w.close_object();

  w.key_object("threshold_model");
  w.field_real("location", b.threshold_model.location);
  w.field_real("scale", b.threshold_model.scale);
  w.close_object();

  w.end_object();
  out << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

namespace {

ModelBundle bundle_from_json(const json& doc, const std::string& path) {
  const auto& schema = require(doc, "schema_version");
  if (!schema.is_string() || schema.get<std::string>() != kSchemaVersion)
    throw Error(ErrorCode::SchemaVersionMismatch,
                path + ": expected schema '" + kSchemaVersion + "'");

  ModelBundle b;
  b.schema_version = kSchemaVersion;
  b.percentile = require(doc, "percentile").get<double>();
  b.threshold = require(doc, "threshold").get<double>();

  const auto& fractions = require(doc, "split_fractions");
  if (!fractions.is_array() || fractions.size() != 3)
    throw Error(ErrorCode::MalformedBundle, "split_fractions must have 3 entries");
  b.split = SplitSpec(fractions[0].get<double>(), fractions[1].get<double>(),
                      fractions[2].get<double>());

  const auto& cfg_json = require(doc, "config");
  PredictorConfig cfg;
  cfg.lookback = require(cfg_json, "lookback").get<Index>();
  cfg.horizon = require(cfg_json, "horizon").get<Index>();
  cfg.hidden_size = require(cfg_json, "hidden_size").get<Index>();
  cfg.epochs = require(cfg_json, "epochs").get<Index>();
  cfg.learning_rate = require(cfg_json, "learning_rate").get<double>();
  cfg.batch_size = require(cfg_json, "batch_size").get<Index>();
  cfg.grad_clip = require(cfg_json, "grad_clip").get<double>();
  cfg.seed = require(cfg_json, "seed").get<std::uint64_t>();
  cfg.validate();

  const PredictorKind kind =
      predictor_kind_from_string(require(cfg_json, "kind").get<std::string>());

  const auto& norm = require(doc, "normalizer");
  b.normalizer.mean = require(norm, "mean").get<double>();
  b.normalizer.std = require(norm, "std").get<double>();

  b.model.kind = kind;
  b.model.config = cfg;
  const auto& predictor = require(doc, "predictor");
  if (kind == PredictorKind::lstm) {
    const auto& lp = require(predictor, "lstm");
    LstmParams p;
    p.w_input = matrix_from_json(require(lp, "w_input"));
    p.w_forget = matrix_from_json(require(lp, "w_forget"));
    p.w_output = matrix_from_json(require(lp, "w_output"));
    p.w_candidate = matrix_from_json(require(lp, "w_candidate"));
    p.b_input = vector_from_json(require(lp, "b_input"));
    p.b_forget = vector_from_json(require(lp, "b_forget"));
    p.b_output = vector_from_json(require(lp, "b_output"));
    p.b_candidate = vector_from_json(require(lp, "b_candidate"));
    p.w_proj = matrix_from_json(require(lp, "w_proj"));
    p.b_proj = vector_from_json(require(lp, "b_proj"));

    const Index h = cfg.hidden_size;
    const bool shapes_ok = p.w_input.rows() == h && p.w_input.cols() == 1 + h &&
                           p.w_forget.rows() == h && p.w_forget.cols() == 1 + h &&
                           p.w_output.rows() == h && p.w_output.cols() == 1 + h &&
                           p.w_candidate.rows() == h && p.w_candidate.cols() == 1 + h &&
                           p.b_input.size() == h && p.b_forget.size() == h &&
                           p.b_output.size() == h && p.b_candidate.size() == h &&
                           p.w_proj.rows() == cfg.horizon && p.w_proj.cols() == h &&
                           p.b_proj.size() == cfg.horizon;
    if (!shapes_ok)
      throw Error(ErrorCode::MalformedBundle, "lstm parameter shapes do not match config");
    b.model.params = std::move(p);
  } else {
    const auto& ap = require(predictor, "linear_ar");
    ArParams p;
    p.coeff = matrix_from_json(require(ap, "coeff"));
    p.intercept = vector_from_json(require(ap, "intercept"));
    if (p.coeff.rows() != cfg.horizon || p.coeff.cols() != cfg.lookback ||
        p.intercept.size() != cfg.horizon)
      throw Error(ErrorCode::MalformedBundle, "linear-ar parameter shapes do not match config");
    b.model.params = std::move(p);
  }

  const auto& em = require(doc, "error_model");
  const Index dim = require(em, "dimension").get<Index>();
  Vector mean = vector_from_json(require(em, "mean"));
  Matrix cov = matrix_from_json(require(em, "covariance"));
  if (mean.size() != dim || cov.rows() != dim || cov.cols() != dim)
    throw Error(ErrorCode::MalformedBundle, "error_model shapes do not match dimension");
  b.error_model = mvn_from_moments(std::move(mean), std::move(cov));

  const auto& tm = require(doc, "threshold_model");
  b.threshold_model.location = require(tm, "location").get<double>();
  b.threshold_model.scale = require(tm, "scale").get<double>();
  if (!(b.threshold_model.scale > 0.0))
    throw Error(ErrorCode::MalformedBundle, "threshold_model scale must be positive");

  if (!(b.percentile > 0.0 && b.percentile < 1.0))
    throw Error(ErrorCode::MalformedBundle, "percentile out of range");
  if (b.threshold != truncated_quantile(b.threshold_model, b.percentile))
    throw Error(ErrorCode::MalformedBundle,
                "threshold is not the stored percentile of the threshold model");
  return b;
}

}  // namespace

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedBundle, path + ": " + e.what());
  }

  try {
    return bundle_from_json(doc, path);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedBundle, path + ": " + e.what());
  } catch (const Error& e) {
    // every field-level rejection reads as a damaged bundle; only the schema
    // check keeps its own code
    if (e.code() == ErrorCode::SchemaVersionMismatch || e.code() == ErrorCode::MalformedBundle)
      throw;
    throw Error(ErrorCode::MalformedBundle, std::string(e.what()));
  }
}

}  // namespace greenhouse
