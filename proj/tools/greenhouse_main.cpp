// SPDX-License-Identifier: Apache-2.0
//
// greenhouse command-line tool: train / detect / eval / synth.
// Exit codes: 0 success, 1 runtime or data failure, 2 usage error.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "greenhouse/detector.hpp"
#include "greenhouse/error.hpp"
#include "greenhouse/evalbench.hpp"
#include "greenhouse/pipeline.hpp"
#include "greenhouse/series.hpp"

namespace {

using namespace greenhouse;

std::string real_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t");
  return text.substr(first, last - first + 1);
}

// flat key=value file mirroring the subcommand's flag names; values given on
// the command line win; unknown keys are usage errors
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--config",
                                 "line " + std::to_string(lineno) + " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    CLI::Option* opt =
        key == "config" || key.empty() ? nullptr : cmd->get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw CLI::ValidationError(
          "--config", "unknown key '" + key + "' at line " + std::to_string(lineno));
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

const CLI::Validator OpenUnitInterval(
    [](std::string& input) -> std::string {
      try {
        const double v = std::stod(input);
        if (v > 0.0 && v < 1.0) return {};
      } catch (const std::exception&) {
      }
      return std::string("value '") + input + "' must lie strictly between 0 and 1";
    },
    "FLOAT in (0,1)");

struct TrainArgs {
  std::string input;
  std::string model_path;
  std::string config_path;
  std::string kind = "lstm";
  PredictorConfig cfg;
  double percentile = 0.99;
  std::vector<double> split{0.5, 0.25, 0.25};
};

void add_hyperparameter_flags(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--kind", args.kind, "Predictor kind: lstm or linear-ar")
      ->check(CLI::IsMember({"lstm", "linear-ar"}));
  cmd->add_option("--lookback", args.cfg.lookback, "Look-back window length B")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--horizon", args.cfg.horizon, "Predict-forward window length F")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--hidden-size", args.cfg.hidden_size, "LSTM hidden state size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", args.cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--learning-rate", args.cfg.learning_rate, "SGD learning rate")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", args.cfg.batch_size, "SGD batch size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--grad-clip", args.cfg.grad_clip, "Global gradient-norm clip")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", args.cfg.seed, "Seed for every random draw");
  cmd->add_option("--percentile", args.percentile, "Threshold percentile rho")
      ->check(OpenUnitInterval);
  cmd->add_option("--split", args.split, "Segment fractions f1,f2,f3")
      ->delimiter(',')
      ->expected(3);
}

int run_train(const TrainArgs& args) {
  const SplitSpec split(args.split[0], args.split[1], args.split[2]);
  const Series series = load_series_csv(args.input);
  std::vector<std::string> warnings;
  PipelineStats stats;
  const ModelBundle bundle =
      train_pipeline(series, args.cfg, split, args.percentile,
                     predictor_kind_from_string(args.kind), &warnings, &stats);
  save_bundle(bundle, args.model_path);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "tau=" << real_str(bundle.threshold) << " rho=" << real_str(bundle.percentile)
            << " segments=" << stats.segment_sizes[0] << "/" << stats.segment_sizes[1] << "/"
            << stats.segment_sizes[2] << " train_mse=" << real_str(stats.training.final_mse)
            << "\n";
  return 0;
}

struct DetectArgs {
  std::string model_path;
  std::string input;
  std::string output;
};

int run_detect(const DetectArgs& args) {
  const ModelBundle bundle = load_bundle(args.model_path);
  const Series series = load_series_csv(args.input);
  const DetectionResult result = detect(bundle, series);
  write_result_csv(result, args.output);
  std::cout << "scored=" << result.scored_count() << " anomalous=" << result.anomaly_count()
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string result_path;
  std::string labels_path;
  Timestamp tolerance = 0;
};

int run_eval(const EvalArgs& args) {
  const DetectionResult result = read_result_csv(args.result_path);
  const LabelSet labels = load_labels_csv(args.labels_path, args.tolerance);
  const Metrics m = score(result, labels);
  std::printf("%.2f %.2f %.2f %ld %ld %ld\n", m.precision, m.recall, m.f1, m.tp, m.fp, m.fn);
  return 0;
}

struct SynthArgs {
  std::string kind = "sine";
  Index n = 1000;
  std::uint64_t seed = 1;
  std::string out;
  SynthParams params;
  Index inject = 0;
  std::string labels_path;
  double magnitude = 10.0;
  Index min_gap = 0;  // 0 -> defaults to lookback + horizon
  Index lookback = 64;
  Index horizon = 8;
};

int run_synth(const SynthArgs& args) {
  const Series series = generate_synthetic(synth_kind_from_string(args.kind), args.n, args.seed,
                                           args.params);
  if (args.inject == 0) {
    save_series_csv(series, args.out);
    std::cout << "series=" << args.out << " n=" << series.size() << "\n";
    return 0;
  }

  SpikeSpec spec;
  spec.count = args.inject;
  spec.magnitude = args.magnitude;
  spec.min_index = args.lookback + args.horizon;
  spec.min_gap = args.min_gap > 0 ? args.min_gap : args.lookback + args.horizon;
  spec.tolerance_steps = args.horizon;
  auto [spiked, labels] = inject_anomalies(series, args.seed, spec);
  save_series_csv(spiked, args.out);
  save_labels_csv(labels, args.labels_path);
  std::cout << "series=" << args.out << " n=" << spiked.size() << " labels=" << args.labels_path
            << " injected=" << labels.timestamps.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-positive time-series anomaly detection"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model bundle on anomaly-free data");
  train_cmd->add_option("--input", train_args.input, "Input series CSV")->required();
  train_cmd->add_option("--model", train_args.model_path, "Output bundle path")->required();
  add_hyperparameter_flags(train_cmd, train_args);
  train_cmd->add_option("--config", train_args.config_path,
                        "Read defaults from a flat key=value file (flags win)");

  DetectArgs detect_args;
  CLI::App* detect_cmd = app.add_subcommand("detect", "Label anomalies in a series");
  detect_cmd->add_option("--model", detect_args.model_path, "Trained bundle path")->required();
  detect_cmd->add_option("--input", detect_args.input, "Input series CSV")->required();
  detect_cmd->add_option("--output", detect_args.output, "Detection result CSV")->required();

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a detection result against labels");
  eval_cmd->add_option("--result", eval_args.result_path, "Detection result CSV")->required();
  eval_cmd->add_option("--labels", eval_args.labels_path, "Label CSV")->required();
  eval_cmd->add_option("--tolerance", eval_args.tolerance, "Match window in steps")
      ->check(CLI::NonNegativeNumber);

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic series");
  synth_cmd->add_option("--kind", synth_args.kind, "sine, sine+noise or random-walk-with-drift")
      ->check(CLI::IsMember({"sine", "sine+noise", "random-walk-with-drift"}));
  synth_cmd->add_option("--n", synth_args.n, "Number of points")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_args.seed, "Seed for every random draw");
  synth_cmd->add_option("--out", synth_args.out, "Output series CSV")->required();
  synth_cmd->add_option("--amplitude", synth_args.params.amplitude, "Sine amplitude");
  synth_cmd->add_option("--period", synth_args.params.period, "Sine period in steps")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise-std", synth_args.params.noise_std, "Gaussian noise std")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--drift", synth_args.params.drift, "Random-walk drift per step");
  synth_cmd->add_option("--start-time", synth_args.params.start_time, "First timestamp");
  synth_cmd->add_option("--step", synth_args.params.step, "Timestamp step")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--inject", synth_args.inject, "Number of spikes to inject")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--labels", synth_args.labels_path, "Label CSV path (with --inject)");
  synth_cmd->add_option("--magnitude", synth_args.magnitude, "Spike size in series-std units")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--min-gap", synth_args.min_gap, "Minimum spike separation in steps")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--lookback", synth_args.lookback, "B used for spike placement floor")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--horizon", synth_args.horizon, "F used for label tolerance")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  if (*synth_cmd && synth_args.inject > 0 && synth_args.labels_path.empty()) {
    std::cerr << "--labels: required when --inject is given\n";
    return 2;
  }

  if (*train_cmd && !train_args.config_path.empty()) {
    try {
      apply_config_file(train_cmd, train_args.config_path);
    } catch (const CLI::Error& e) {
      std::cerr << e.what() << "\n";
      return 2;
    }
  }

  try {
    if (*train_cmd) {
      try {
        SplitSpec check(train_args.split[0], train_args.split[1], train_args.split[2]);
      } catch (const Error& e) {
        std::cerr << "--split: " << e.what() << "\n";
        return 2;
      }
      return run_train(train_args);
    }
    if (*detect_cmd) return run_detect(detect_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*synth_cmd) return run_synth(synth_args);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
