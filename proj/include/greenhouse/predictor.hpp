// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "greenhouse/series.hpp"
#include "greenhouse/types.hpp"

namespace greenhouse {

enum class PredictorKind { lstm, linear_ar };

const char* to_string(PredictorKind kind);
PredictorKind predictor_kind_from_string(const std::string& name);

struct PredictorConfig {
  Index lookback = 64;     // B
  Index horizon = 8;       // F
  Index hidden_size = 32;
  Index epochs = 100;
  double learning_rate = 0.05;
  Index batch_size = 32;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;

  void validate() const;  // throws BadParams naming the offending field
};

/// Single-layer LSTM cell weights plus the linear projection of the final
/// hidden state onto all horizon outputs. Gate matrices act on the stacked
/// input [x_t; h_{t-1}], so each is hidden_size x (1 + hidden_size).
struct LstmParams {
  Matrix w_input, w_forget, w_output, w_candidate;
  Vector b_input, b_forget, b_output, b_candidate;
  Matrix w_proj;  // horizon x hidden_size
  Vector b_proj;  // horizon

  static LstmParams zeros(Index hidden_size, Index horizon);
  /// Uniform [-k, k] with k = 1/sqrt(hidden_size) from the seeded generator;
  /// fill order is w_input, w_forget, w_output, w_candidate, w_proj, each
  /// column-major. Biases start at zero except the forget bias at 1.
  static LstmParams seeded_init(const PredictorConfig& cfg);

  // in-place arithmetic used by SGD and gradient clipping
  void add_scaled(const LstmParams& other, double factor);
  void scale(double factor);
  double squared_norm() const;
};

/// Per-horizon-step autoregressive coefficients; coeff.row(k) is aligned with
/// the window (oldest value first) and intercept(k) is the constant term.
struct ArParams {
  Matrix coeff;      // horizon x lookback
  Vector intercept;  // horizon
};

struct PredictorModel {
  PredictorKind kind = PredictorKind::lstm;
  PredictorConfig config;
  std::variant<LstmParams, ArParams> params;

  const LstmParams& lstm() const { return std::get<LstmParams>(params); }
  const ArParams& ar() const { return std::get<ArParams>(params); }
};

/// Sliding supervised pairs: row j of inputs is [v_{j+1} .. v_{j+B}] and row j
/// of targets is the following F values. Exactly n - B - F + 1 rows.
struct TrainingPairs {
  Matrix inputs;   // count x lookback
  Matrix targets;  // count x horizon
};

TrainingPairs make_training_pairs(const Series& s, Index lookback, Index horizon);

/// Forward-pass activations kept for backpropagation through time.
/// All matrices are hidden x batch; windows enter as lookback x batch columns.
struct LstmCache {
  std::vector<Matrix> stacked_input;  // (1+hidden) x batch per step
  std::vector<Matrix> gate_i, gate_f, gate_o, gate_g;
  std::vector<Matrix> cell_prev, tanh_cell;
  Matrix hidden_final;
};

/// Runs the cell over a batch of windows (columns), zero initial state per
/// window, and projects the final hidden state: returns horizon x batch.
/// Throws NonFiniteActivation if the output diverged.
Matrix lstm_forward(const LstmParams& p, const MatrixRef& windows, LstmCache* cache = nullptr);

/// Backpropagation through time for a forward call that filled `cache`.
/// output_gradient is dLoss/dOutput (horizon x batch); the result has the
/// same shapes as the parameters.
LstmParams lstm_backward(const LstmParams& p, const LstmCache& cache,
                         const MatrixRef& output_gradient);

struct TrainStats {
  double initial_mse = 0.0;
  double final_mse = 0.0;
  std::vector<double> epoch_mse;  // full-data MSE after each epoch
};

/// Deterministic training: seeded init, fixed contiguous batch order, plain
/// SGD with global-norm gradient clipping (lstm) or ordinary least squares
/// with a 1e-9 ridge (linear-ar).
PredictorModel train(PredictorKind kind, const Series& s, const PredictorConfig& cfg,
                     TrainStats* stats = nullptr);

/// Pure function of (model, window); always exactly `horizon` values.
Vector predict(const PredictorModel& m, const VectorRef& window);

}  // namespace greenhouse
