// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "greenhouse/error.hpp"
#include "greenhouse/predictor.hpp"
#include "greenhouse/rng.hpp"
#include "greenhouse/series.hpp"
#include "test_util.hpp"

using namespace greenhouse;
using testutil::make_series;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::BadParams;
}

// flat view over every parameter block, in a fixed order
std::vector<std::pair<double*, Index>> param_blocks(LstmParams& p) {
  return {{p.w_input.data(), p.w_input.size()},
          {p.w_forget.data(), p.w_forget.size()},
          {p.w_output.data(), p.w_output.size()},
          {p.w_candidate.data(), p.w_candidate.size()},
          {p.b_input.data(), p.b_input.size()},
          {p.b_forget.data(), p.b_forget.size()},
          {p.b_output.data(), p.b_output.size()},
          {p.b_candidate.data(), p.b_candidate.size()},
          {p.w_proj.data(), p.w_proj.size()},
          {p.b_proj.data(), p.b_proj.size()}};
}

double window_loss(const LstmParams& p, const Vector& window, const Vector& target) {
  const Matrix y = lstm_forward(p, window);
  return (y.col(0) - target).squaredNorm() / static_cast<double>(target.size());
}

LstmParams random_params(Rng& rng, Index hidden, Index horizon) {
  LstmParams p = LstmParams::zeros(hidden, horizon);
  for (auto [data, size] : param_blocks(p))
    for (Index i = 0; i < size; ++i) data[i] = rng.uniform(-0.7, 0.7);
  return p;
}

Series noiseless_sine(Index n, double period = 50.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i)
    v[i] = std::sin(2.0 * M_PI * static_cast<double>(i) / period);
  return Series(0, 1, std::move(v));
}

}  // namespace

TEST_CASE("make_training_pairs slides per the window table") {
  const Series s = make_series({1, 2, 3, 4, 5});
  const TrainingPairs one = make_training_pairs(s, 3, 2);
  REQUIRE(one.inputs.rows() == 1);
  CHECK(one.inputs(0, 0) == 1.0);
  CHECK(one.inputs(0, 2) == 3.0);
  CHECK(one.targets(0, 0) == 4.0);
  CHECK(one.targets(0, 1) == 5.0);

  const Series s6 = make_series({1, 2, 3, 4, 5, 6});
  const TrainingPairs two = make_training_pairs(s6, 3, 2);
  REQUIRE(two.inputs.rows() == 2);
  CHECK(two.inputs(1, 0) == 2.0);
  CHECK(two.inputs(1, 2) == 4.0);
  CHECK(two.targets(1, 0) == 5.0);
  CHECK(two.targets(1, 1) == 6.0);

  CHECK(make_training_pairs(make_series({1, 2, 3}), 2, 1).inputs.rows() == 1);
  CHECK(code_of([&] { make_training_pairs(s, 4, 2); }) == ErrorCode::SeriesTooShort);
}

TEST_CASE("zero parameters are a fixed point of the cell") {
  const LstmParams p = LstmParams::zeros(4, 3);
  Vector window(5);
  window << 1.0, -2.0, 0.5, 3.0, -0.1;
  const Matrix y = lstm_forward(p, window);
  REQUIRE(y.rows() == 3);
  for (Index i = 0; i < 3; ++i) CHECK(y(i, 0) == 0.0);
}

TEST_CASE("hand-evaluated single-cell traces") {
  LstmParams p = LstmParams::zeros(1, 1);
  p.w_input << 0.5, 0.25;
  p.b_input << 0.1;
  p.w_forget << 0.3, -0.2;
  p.b_forget << 1.0;
  p.w_output << -0.4, 0.6;
  p.b_output << -0.1;
  p.w_candidate << 0.8, -0.5;
  p.b_candidate << 0.2;
  p.w_proj << 1.5;
  p.b_proj << -0.3;

  Vector one_step(1);
  one_step << 1.0;
  CHECK(lstm_forward(p, one_step)(0, 0) ==
        doctest::Approx(-0.04199612407834491).epsilon(1e-14));

  Vector two_step(2);
  two_step << 1.0, -0.5;
  CHECK(lstm_forward(p, two_step)(0, 0) ==
        doctest::Approx(-0.12974449456618642).epsilon(1e-14));
}

TEST_CASE("forward pass is deterministic") {
  Rng rng(3);
  LstmParams p = random_params(rng, 3, 2);
  Vector window(4);
  window << 0.3, -0.8, 1.2, 0.05;
  const Matrix a = lstm_forward(p, window);
  const Matrix b = lstm_forward(p, window);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(41);
  const double step = 1e-5;
  for (int trial = 0; trial < 22; ++trial) {
    const Index hidden = 1 + static_cast<Index>(rng.uniform_int(4));
    const Index lookback = 1 + static_cast<Index>(rng.uniform_int(5));
    const Index horizon = 1 + static_cast<Index>(rng.uniform_int(3));

    LstmParams p = random_params(rng, hidden, horizon);
    Vector window(lookback), target(horizon);
    for (Index i = 0; i < lookback; ++i) window[i] = rng.normal();
    for (Index i = 0; i < horizon; ++i) target[i] = rng.normal();

    LstmCache cache;
    const Matrix y = lstm_forward(p, window, &cache);
    const Matrix d_out = (2.0 / static_cast<double>(horizon)) * (y.col(0) - target);
    LstmParams analytic = lstm_backward(p, cache, d_out);

    auto blocks = param_blocks(p);
    auto grad_blocks = param_blocks(analytic);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      auto [data, size] = blocks[b];
      for (Index i = 0; i < size; ++i) {
        const double saved = data[i];
        data[i] = saved + step;
        const double up = window_loss(p, window, target);
        data[i] = saved - step;
        const double down = window_loss(p, window, target);
        data[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double analytic_value = grad_blocks[b].first[i];
        const double rel =
            std::abs(analytic_value - numeric) / std::max(1.0, std::abs(analytic_value));
        CHECK(rel < 1e-4);
      }
    }
  }
}

TEST_CASE("zero output gradient produces zero parameter gradients") {
  Rng rng(7);
  LstmParams p = random_params(rng, 3, 2);
  Vector window(4);
  for (Index i = 0; i < 4; ++i) window[i] = rng.normal();
  LstmCache cache;
  lstm_forward(p, window, &cache);
  LstmParams grads = lstm_backward(p, cache, Matrix::Zero(2, 1));
  CHECK(grads.squared_norm() == 0.0);
}

TEST_CASE("a small step against the gradient decreases the loss") {
  Rng rng(13);
  LstmParams p = random_params(rng, 4, 2);
  Vector window(5), target(2);
  for (Index i = 0; i < 5; ++i) window[i] = rng.normal();
  for (Index i = 0; i < 2; ++i) target[i] = rng.normal();

  LstmCache cache;
  const Matrix y = lstm_forward(p, window, &cache);
  const double before = (y.col(0) - target).squaredNorm() / 2.0;
  const Matrix d_out = (2.0 / 2.0) * (y.col(0) - target);
  LstmParams grads = lstm_backward(p, cache, d_out);
  p.add_scaled(grads, -1e-3);
  CHECK(window_loss(p, window, target) < before);
}

TEST_CASE("non-finite parameters surface as NonFiniteActivation") {
  LstmParams p = LstmParams::zeros(2, 1);
  p.w_proj(0, 0) = std::numeric_limits<double>::infinity();
  Vector window(3);
  window << 1, 2, 3;
  CHECK(code_of([&] { lstm_forward(p, window); }) == ErrorCode::NonFiniteActivation);
}

TEST_CASE("linear-ar solves an exactly linear series") {
  Vector v(240);
  for (Index i = 0; i < v.size(); ++i) v[i] = 2.0 * static_cast<double>(i + 1);
  const Series s(0, 1, v.head(200));

  PredictorConfig cfg;
  cfg.lookback = 8;
  cfg.horizon = 2;
  TrainStats stats;
  const PredictorModel model = train(PredictorKind::linear_ar, s, cfg, &stats);
  CHECK(stats.final_mse <= stats.initial_mse);

  // continuation of the same line, unseen during the fit
  double worst_sq = 0.0;
  for (Index start = 200; start + cfg.lookback + cfg.horizon <= 240; ++start) {
    const Vector window = v.segment(start, cfg.lookback);
    const Vector pred = predict(model, window);
    const Vector truth = v.segment(start + cfg.lookback, cfg.horizon);
    worst_sq = std::max(worst_sq, (pred - truth).squaredNorm() / 2.0);
  }
  CHECK(worst_sq < 1e-10);
}

TEST_CASE("linear-ar predict is a dot product over the window") {
  PredictorConfig cfg;
  cfg.lookback = 3;
  cfg.horizon = 1;
  ArParams params;
  params.coeff = Matrix::Zero(1, 3);
  params.coeff(0, 2) = 1.0;  // carry the most recent value
  params.intercept = Vector::Zero(1);
  PredictorModel model;
  model.kind = PredictorKind::linear_ar;
  model.config = cfg;
  model.params = params;

  Vector window(3);
  window << 7.0, -1.0, 4.5;
  const Vector out = predict(model, window);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == 4.5);

  CHECK(code_of([&] { predict(model, Vector::Ones(2)); }) == ErrorCode::WrongWindowLength);
}

TEST_CASE("untrained zero-initialized lstm predicts zero") {
  PredictorConfig cfg;
  cfg.lookback = 4;
  cfg.horizon = 3;
  cfg.hidden_size = 5;
  PredictorModel model;
  model.kind = PredictorKind::lstm;
  model.config = cfg;
  model.params = LstmParams::zeros(5, 3);
  const Vector out = predict(model, Vector::Ones(4));
  REQUIRE(out.size() == 3);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predict always returns exactly horizon values") {
  Rng rng(19);
  for (int trial = 0; trial < 8; ++trial) {
    PredictorConfig cfg;
    cfg.lookback = 1 + static_cast<Index>(rng.uniform_int(6));
    cfg.horizon = 1 + static_cast<Index>(rng.uniform_int(5));
    cfg.hidden_size = 1 + static_cast<Index>(rng.uniform_int(4));
    cfg.seed = rng.next();
    PredictorModel model;
    model.kind = PredictorKind::lstm;
    model.config = cfg;
    model.params = LstmParams::seeded_init(cfg);
    Vector window(cfg.lookback);
    for (Index i = 0; i < cfg.lookback; ++i) window[i] = rng.normal();
    CHECK(predict(model, window).size() == cfg.horizon);
  }
}

TEST_CASE("lstm learns a noiseless sine") {
  const Series raw = noiseless_sine(1000);
  const Normalizer norm = fit_normalizer(raw);
  const Series s = apply_normalizer(norm, raw);

  PredictorConfig cfg;
  cfg.lookback = 25;
  cfg.horizon = 1;
  cfg.hidden_size = 16;
  cfg.epochs = 200;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 32;
  cfg.seed = 2024;

  TrainStats stats;
  const PredictorModel model = train(PredictorKind::lstm, s, cfg, &stats);

  CHECK(stats.final_mse < 1e-2);
  CHECK(stats.final_mse <= stats.initial_mse);

  // epoch-end loss is non-increasing over the last half, 5% tolerance
  const std::size_t half = stats.epoch_mse.size() / 2;
  for (std::size_t e = half; e + 1 < stats.epoch_mse.size(); ++e)
    CHECK(stats.epoch_mse[e + 1] <= stats.epoch_mse[e] * 1.05);

  // held-out phase: windows the training segment never saw
  const Series long_raw = noiseless_sine(1400);
  const Series held = apply_normalizer(norm, long_raw);
  double worst = 0.0;
  for (Index start : {1013, 1100, 1207, 1331}) {
    const Vector window = held.values().segment(start, cfg.lookback);
    const double pred = predict(model, window)[0];
    const double truth = held.values()[start + cfg.lookback];
    worst = std::max(worst, std::abs(pred - truth));
  }
  CHECK(worst < 0.2);
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
  const Series s = noiseless_sine(200);
  PredictorConfig cfg;
  cfg.lookback = 10;
  cfg.horizon = 2;
  cfg.hidden_size = 6;
  cfg.epochs = 5;
  cfg.seed = 99;

  const PredictorModel a = train(PredictorKind::lstm, s, cfg);
  const PredictorModel b = train(PredictorKind::lstm, s, cfg);
  LstmParams pa = a.lstm();
  LstmParams pb = b.lstm();
  auto blocks_a = param_blocks(pa);
  auto blocks_b = param_blocks(pb);
  for (std::size_t i = 0; i < blocks_a.size(); ++i) {
    REQUIRE(blocks_a[i].second == blocks_b[i].second);
    for (Index j = 0; j < blocks_a[i].second; ++j)
      CHECK(blocks_a[i].first[j] == blocks_b[i].first[j]);
  }
}

TEST_CASE("non-finite loss reports DivergedTraining with the epoch") {
  // data whose squared error overflows the double range: the bounded hidden
  // state cannot reach 1e160, so the epoch-end loss is infinite
  Vector v(60);
  for (Index i = 0; i < 60; ++i) v[i] = (i % 2 == 0 ? 1.0 : -1.0) * 1e160;
  const Series s(0, 1, v);
  PredictorConfig cfg;
  cfg.lookback = 4;
  cfg.horizon = 1;
  cfg.hidden_size = 4;
  cfg.epochs = 3;
  cfg.seed = 7;
  try {
    train(PredictorKind::lstm, s, cfg);
    FAIL("expected DivergedTraining");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergedTraining);
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("config validation names the offending field") {
  PredictorConfig cfg;
  cfg.lookback = 0;
  try {
    cfg.validate();
    FAIL("expected BadParams");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadParams);
    CHECK(std::string(e.what()).find("lookback") != std::string::npos);
  }
}
