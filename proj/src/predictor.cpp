// SPDX-License-Identifier: Apache-2.0
#include "greenhouse/predictor.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "greenhouse/error.hpp"
#include "greenhouse/rng.hpp"

namespace greenhouse {

const char* to_string(PredictorKind kind) {
  return kind == PredictorKind::lstm ? "lstm" : "linear-ar";
}

PredictorKind predictor_kind_from_string(const std::string& name) {
  if (name == "lstm") return PredictorKind::lstm;
  if (name == "linear-ar") return PredictorKind::linear_ar;
  throw Error(ErrorCode::BadParams, "unknown predictor kind '" + name + "'");
}

void PredictorConfig::validate() const {
  if (lookback < 1) throw Error(ErrorCode::BadParams, "lookback must be >= 1");
  if (horizon < 1) throw Error(ErrorCode::BadParams, "horizon must be >= 1");
  if (hidden_size < 1) throw Error(ErrorCode::BadParams, "hidden_size must be >= 1");
  if (epochs < 1) throw Error(ErrorCode::BadParams, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::BadParams, "learning_rate must be > 0");
  if (batch_size < 1) throw Error(ErrorCode::BadParams, "batch_size must be >= 1");
  if (!(grad_clip > 0.0)) throw Error(ErrorCode::BadParams, "grad_clip must be > 0");
}

LstmParams LstmParams::zeros(Index hidden_size, Index horizon) {
  LstmParams p;
  p.w_input = Matrix::Zero(hidden_size, 1 + hidden_size);
  p.w_forget = Matrix::Zero(hidden_size, 1 + hidden_size);
  p.w_output = Matrix::Zero(hidden_size, 1 + hidden_size);
  p.w_candidate = Matrix::Zero(hidden_size, 1 + hidden_size);
  p.b_input = Vector::Zero(hidden_size);
  p.b_forget = Vector::Zero(hidden_size);
  p.b_output = Vector::Zero(hidden_size);
  p.b_candidate = Vector::Zero(hidden_size);
  p.w_proj = Matrix::Zero(horizon, hidden_size);
  p.b_proj = Vector::Zero(horizon);
  return p;
}

namespace {

void fill_uniform(Rng& rng, Matrix& m, double k) {
  for (Index col = 0; col < m.cols(); ++col)
    for (Index row = 0; row < m.rows(); ++row) m(row, col) = rng.uniform(-k, k);
}

}  // namespace

LstmParams LstmParams::seeded_init(const PredictorConfig& cfg) {
  LstmParams p = zeros(cfg.hidden_size, cfg.horizon);
  Rng rng(cfg.seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_size));
  fill_uniform(rng, p.w_input, k);
  fill_uniform(rng, p.w_forget, k);
  fill_uniform(rng, p.w_output, k);
  fill_uniform(rng, p.w_candidate, k);
  fill_uniform(rng, p.w_proj, k);
  p.b_forget.setOnes();  // start with an open forget gate
  return p;
}

void LstmParams::add_scaled(const LstmParams& other, double factor) {
  w_input += factor * other.w_input;
  w_forget += factor * other.w_forget;
  w_output += factor * other.w_output;
  w_candidate += factor * other.w_candidate;
  b_input += factor * other.b_input;
  b_forget += factor * other.b_forget;
  b_output += factor * other.b_output;
  b_candidate += factor * other.b_candidate;
  w_proj += factor * other.w_proj;
  b_proj += factor * other.b_proj;
}

void LstmParams::scale(double factor) {
  w_input *= factor;
  w_forget *= factor;
  w_output *= factor;
  w_candidate *= factor;
  b_input *= factor;
  b_forget *= factor;
  b_output *= factor;
  b_candidate *= factor;
  w_proj *= factor;
  b_proj *= factor;
}

double LstmParams::squared_norm() const {
  return w_input.squaredNorm() + w_forget.squaredNorm() + w_output.squaredNorm() +
         w_candidate.squaredNorm() + b_input.squaredNorm() + b_forget.squaredNorm() +
         b_output.squaredNorm() + b_candidate.squaredNorm() + w_proj.squaredNorm() +
         b_proj.squaredNorm();
}

TrainingPairs make_training_pairs(const Series& s, Index lookback, Index horizon) {
  const Index n = s.size();
  if (n < lookback + horizon)
    throw Error(ErrorCode::SeriesTooShort,
                "need at least " + std::to_string(lookback + horizon) + " points, got " +
                    std::to_string(n));
  const Index count = n - lookback - horizon + 1;
  TrainingPairs pairs;
  pairs.inputs.resize(count, lookback);
  pairs.targets.resize(count, horizon);
  for (Index j = 0; j < count; ++j) {
    pairs.inputs.row(j) = s.values().segment(j, lookback);
    pairs.targets.row(j) = s.values().segment(j + lookback, horizon);
  }
  return pairs;
}

namespace {

inline Matrix sigmoid(const Matrix& a) {
  return ((-a.array()).exp() + 1.0).inverse().matrix();
}

}  // namespace

Matrix lstm_forward(const LstmParams& p, const MatrixRef& windows, LstmCache* cache) {
  const Index steps = windows.rows();
  const Index batch = windows.cols();
  const Index hidden = p.b_input.size();

  Matrix h = Matrix::Zero(hidden, batch);
  Matrix c = Matrix::Zero(hidden, batch);

  if (cache) {
    cache->stacked_input.clear();
    cache->gate_i.clear();
    cache->gate_f.clear();
    cache->gate_o.clear();
    cache->gate_g.clear();
    cache->cell_prev.clear();
    cache->tanh_cell.clear();
    cache->stacked_input.reserve(steps);
    cache->gate_i.reserve(steps);
    cache->gate_f.reserve(steps);
    cache->gate_o.reserve(steps);
    cache->gate_g.reserve(steps);
    cache->cell_prev.reserve(steps);
    cache->tanh_cell.reserve(steps);
  }

  Matrix z(1 + hidden, batch);
  for (Index t = 0; t < steps; ++t) {
    z.row(0) = windows.row(t);
    z.bottomRows(hidden) = h;

    Matrix gi = sigmoid((p.w_input * z).colwise() + p.b_input);
    Matrix gf = sigmoid((p.w_forget * z).colwise() + p.b_forget);
    Matrix go = sigmoid((p.w_output * z).colwise() + p.b_output);
    Matrix gg = ((p.w_candidate * z).colwise() + p.b_candidate).array().tanh().matrix();

    Matrix c_next = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
    Matrix tc = c_next.array().tanh().matrix();

    if (cache) {
      cache->stacked_input.push_back(z);
      cache->gate_i.push_back(std::move(gi));
      cache->gate_f.push_back(std::move(gf));
      cache->gate_o.push_back(go);
      cache->gate_g.push_back(std::move(gg));
      cache->cell_prev.push_back(std::move(c));
      cache->tanh_cell.push_back(tc);
    }
    c = std::move(c_next);
    h = go.cwiseProduct(tc);
  }

  Matrix out = (p.w_proj * h).colwise() + p.b_proj;
  if (!out.allFinite())
    throw Error(ErrorCode::NonFiniteActivation, "lstm output diverged");
  if (cache) cache->hidden_final = std::move(h);
  return out;
}

LstmParams lstm_backward(const LstmParams& p, const LstmCache& cache,
                         const MatrixRef& output_gradient) {
  const Index steps = static_cast<Index>(cache.stacked_input.size());
  const Index hidden = p.b_input.size();

  LstmParams grad = LstmParams::zeros(hidden, p.b_proj.size());

  grad.w_proj = output_gradient * cache.hidden_final.transpose();
  grad.b_proj = output_gradient.rowwise().sum();

  Matrix dh = p.w_proj.transpose() * output_gradient;
  Matrix dc = Matrix::Zero(hidden, dh.cols());

  for (Index t = steps - 1; t >= 0; --t) {
    const Matrix& gi = cache.gate_i[t];
    const Matrix& gf = cache.gate_f[t];
    const Matrix& go = cache.gate_o[t];
    const Matrix& gg = cache.gate_g[t];
    const Matrix& tc = cache.tanh_cell[t];
    const Matrix& z = cache.stacked_input[t];

    Matrix d_out = dh.cwiseProduct(tc);
    dc.array() += dh.array() * go.array() * (1.0 - tc.array().square());

    Matrix d_in = dc.cwiseProduct(gg);
    Matrix d_cand = dc.cwiseProduct(gi);
    Matrix d_forget = dc.cwiseProduct(cache.cell_prev[t]);
    Matrix dc_prev = dc.cwiseProduct(gf);

    // pre-activation gradients through sigmoid / tanh
    Matrix a_i = (d_in.array() * gi.array() * (1.0 - gi.array())).matrix();
    Matrix a_f = (d_forget.array() * gf.array() * (1.0 - gf.array())).matrix();
    Matrix a_o = (d_out.array() * go.array() * (1.0 - go.array())).matrix();
    Matrix a_g = (d_cand.array() * (1.0 - gg.array().square())).matrix();

    grad.w_input.noalias() += a_i * z.transpose();
    grad.w_forget.noalias() += a_f * z.transpose();
    grad.w_output.noalias() += a_o * z.transpose();
    grad.w_candidate.noalias() += a_g * z.transpose();
    grad.b_input += a_i.rowwise().sum();
    grad.b_forget += a_f.rowwise().sum();
    grad.b_output += a_o.rowwise().sum();
    grad.b_candidate += a_g.rowwise().sum();

    Matrix dz = p.w_input.transpose() * a_i + p.w_forget.transpose() * a_f +
                p.w_output.transpose() * a_o + p.w_candidate.transpose() * a_g;
    dh = dz.bottomRows(hidden);
    dc = std::move(dc_prev);
  }
  return grad;
}

namespace {

double lstm_dataset_mse(const LstmParams& p, const TrainingPairs& pairs, Index batch_size) {
  const Index count = pairs.inputs.rows();
  const Index horizon = pairs.targets.cols();
  double sq_sum = 0.0;
  for (Index start = 0; start < count; start += batch_size) {
    const Index nb = std::min(batch_size, count - start);
    Matrix out = lstm_forward(p, pairs.inputs.middleRows(start, nb).transpose());
    sq_sum += (out - pairs.targets.middleRows(start, nb).transpose()).squaredNorm();
  }
  return sq_sum / static_cast<double>(count * horizon);
}

PredictorModel train_lstm(const Series& s, const PredictorConfig& cfg, TrainStats* stats) {
  const TrainingPairs pairs = make_training_pairs(s, cfg.lookback, cfg.horizon);
  const Index count = pairs.inputs.rows();
  const Index horizon = cfg.horizon;

  LstmParams params = LstmParams::seeded_init(cfg);
  const double initial_mse = lstm_dataset_mse(params, pairs, cfg.batch_size);
  if (stats) {
    stats->initial_mse = initial_mse;
    stats->epoch_mse.clear();
    stats->epoch_mse.reserve(cfg.epochs);
  }

  LstmCache cache;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index start = 0; start < count; start += cfg.batch_size) {
      const Index nb = std::min(cfg.batch_size, count - start);
      Matrix windows = pairs.inputs.middleRows(start, nb).transpose();
      Matrix targets = pairs.targets.middleRows(start, nb).transpose();

      Matrix out = lstm_forward(params, windows, &cache);
      Matrix d_out = (2.0 / static_cast<double>(horizon * nb)) * (out - targets);
      LstmParams grads = lstm_backward(params, cache, d_out);

      const double norm = std::sqrt(grads.squared_norm());
      if (norm > cfg.grad_clip) grads.scale(cfg.grad_clip / norm);
      params.add_scaled(grads, -cfg.learning_rate);
    }
    double epoch_mse;
    try {
      epoch_mse = lstm_dataset_mse(params, pairs, cfg.batch_size);
    } catch (const Error&) {
      epoch_mse = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(epoch_mse))
      throw Error(ErrorCode::DivergedTraining,
                  "non-finite loss at epoch " + std::to_string(epoch + 1));
    if (stats) stats->epoch_mse.push_back(epoch_mse);
  }

  if (stats) stats->final_mse = stats->epoch_mse.back();

  PredictorModel model;
  model.kind = PredictorKind::lstm;
  model.config = cfg;
  model.params = std::move(params);
  return model;
}

PredictorModel train_linear_ar(const Series& s, const PredictorConfig& cfg, TrainStats* stats) {
  const TrainingPairs pairs = make_training_pairs(s, cfg.lookback, cfg.horizon);
  const Index count = pairs.inputs.rows();
  const Index lookback = cfg.lookback;

  // normal equations with a small ridge on the full design (window + bias)
  Matrix design(count, lookback + 1);
  design.leftCols(lookback) = pairs.inputs;
  design.col(lookback).setOnes();

  Matrix gram = design.transpose() * design;
  gram.diagonal().array() += 1e-9;
  Matrix solution = gram.ldlt().solve(design.transpose() * pairs.targets);  // (B+1) x F

  ArParams params;
  params.coeff = solution.topRows(lookback).transpose();
  params.intercept = solution.row(lookback).transpose();

  PredictorModel model;
  model.kind = PredictorKind::linear_ar;
  model.config = cfg;
  model.params = std::move(params);

  if (stats) {
    Matrix fitted = design * solution;
    const double mse = (fitted - pairs.targets).squaredNorm() /
                       static_cast<double>(count * cfg.horizon);
    const double untrained =
        pairs.targets.squaredNorm() / static_cast<double>(count * cfg.horizon);
    stats->initial_mse = untrained;
    stats->final_mse = mse;
    stats->epoch_mse = {mse};
  }
  return model;
}

}  // namespace

PredictorModel train(PredictorKind kind, const Series& s, const PredictorConfig& cfg,
                     TrainStats* stats) {
  cfg.validate();
  return kind == PredictorKind::lstm ? train_lstm(s, cfg, stats)
                                     : train_linear_ar(s, cfg, stats);
}

Vector predict(const PredictorModel& m, const VectorRef& window) {
  if (window.size() != m.config.lookback)
    throw Error(ErrorCode::WrongWindowLength,
                "window has " + std::to_string(window.size()) + " values, model expects " +
                    std::to_string(m.config.lookback));
  if (m.kind == PredictorKind::lstm) {
    return lstm_forward(m.lstm(), window);
  }
  const ArParams& p = m.ar();
  return p.coeff * window + p.intercept;
}

}  // namespace greenhouse
