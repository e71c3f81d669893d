// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "greenhouse/detector.hpp"
#include "greenhouse/pipeline.hpp"
#include "greenhouse/evalbench.hpp"
#include "greenhouse/series.hpp"
#include "test_util.hpp"

using namespace greenhouse;
using testutil::read_file;
using testutil::TempDir;
using testutil::write_file;

namespace {

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

// runs the installed CLI with stdout/stderr captured to files
RunResult run_cli(const TempDir& tmp, const std::string& args) {
  const std::string out_path = tmp.path("stdout.txt");
  const std::string err_path = tmp.path("stderr.txt");
  const std::string command =
      std::string(GREENHOUSE_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int status = std::system(command.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

}  // namespace

TEST_CASE("synth is deterministic and honors injection flags") {
  TempDir tmp("cli_synth");
  const std::string flags =
      "synth --kind sine --n 1000 --seed 7 --out " + tmp.path("a.csv");
  RunResult r1 = run_cli(tmp, flags);
  CHECK(r1.exit_code == 0);
  CHECK(r1.out.find("series=") != std::string::npos);

  RunResult r2 = run_cli(tmp, "synth --kind sine --n 1000 --seed 7 --out " + tmp.path("b.csv"));
  CHECK(r2.exit_code == 0);
  CHECK(read_file(tmp.path("a.csv")) == read_file(tmp.path("b.csv")));

  RunResult r3 = run_cli(tmp, "synth --kind sine+noise --n 800 --seed 7 --lookback 20 "
                              "--horizon 4 --inject 5 --labels " +
                                  tmp.path("l.csv") + " --out " + tmp.path("c.csv"));
  CHECK(r3.exit_code == 0);
  const LabelSet labels = load_labels_csv(tmp.path("l.csv"), 0);
  REQUIRE(labels.timestamps.size() == 5);
  for (Timestamp ts : labels.timestamps) CHECK(ts + 1 >= 24);  // at or past B+F on the 0-grid

  // injection without a labels path is a usage error
  RunResult r4 = run_cli(tmp, "synth --kind sine --n 100 --seed 1 --inject 2 --out " +
                                  tmp.path("d.csv"));
  CHECK(r4.exit_code == 2);
  CHECK(r4.err.find("--labels") != std::string::npos);
}

// the zero-positive contract end to end: training consumes only the series
// CSV; labels exist solely on the evaluation side
TEST_CASE("train detect eval round trip") {
  TempDir tmp("cli_flow");
  const std::string train_csv = tmp.path("train.csv");
  const std::string test_csv = tmp.path("test.csv");
  const std::string labels_csv = tmp.path("labels.csv");

  CHECK(run_cli(tmp, "synth --kind sine+noise --noise-std 1.0 --n 2500 --seed 61 --out " +
                         train_csv)
            .exit_code == 0);
  CHECK(run_cli(tmp, "synth --kind sine+noise --noise-std 1.0 --n 350 --seed 777 --lookback 24 "
                     "--horizon 8 --min-gap 34 --inject 5 --magnitude 10 --labels " +
                         labels_csv + " --out " + test_csv)
            .exit_code == 0);

  const std::string hyper =
      " --kind lstm --lookback 24 --horizon 8 --hidden-size 16 --epochs 25 "
      "--learning-rate 0.1 --seed 5 --percentile 0.99";
  RunResult train_run =
      run_cli(tmp, "train --input " + train_csv + " --model " + tmp.path("m.json") + hyper);
  CHECK(train_run.exit_code == 0);
  CHECK(train_run.out.find("tau=") != std::string::npos);
  CHECK(train_run.out.find("rho=0.99") != std::string::npos);
  CHECK(train_run.out.find("segments=1250/625/625") != std::string::npos);
  CHECK(train_run.out.find("train_mse=") != std::string::npos);
  CHECK(count_lines(train_run.out) == 1);

  // identical invocation produces a byte-identical bundle
  CHECK(run_cli(tmp, "train --input " + train_csv + " --model " + tmp.path("m2.json") + hyper)
            .exit_code == 0);
  CHECK(read_file(tmp.path("m.json")) == read_file(tmp.path("m2.json")));

  RunResult detect_run = run_cli(tmp, "detect --model " + tmp.path("m.json") + " --input " +
                                          test_csv + " --output " + tmp.path("r.csv"));
  CHECK(detect_run.exit_code == 0);
  CHECK(detect_run.out.find("scored=") != std::string::npos);
  CHECK(detect_run.out.find("anomalous=") != std::string::npos);

  // result row count equals input row count (plus headers)
  CHECK(count_lines(read_file(tmp.path("r.csv"))) == 351);

  // repeated detection is byte-identical
  CHECK(run_cli(tmp, "detect --model " + tmp.path("m.json") + " --input " + test_csv +
                         " --output " + tmp.path("r2.csv"))
            .exit_code == 0);
  CHECK(read_file(tmp.path("r.csv")) == read_file(tmp.path("r2.csv")));

  RunResult eval_run =
      run_cli(tmp, "eval --result " + tmp.path("r.csv") + " --labels " + labels_csv +
                       " --tolerance 8");
  CHECK(eval_run.exit_code == 0);
  // precision recall f1 tp fp fn
  std::istringstream fields(eval_run.out);
  double precision, recall, f1;
  long tp, fp, fn;
  fields >> precision >> recall >> f1 >> tp >> fp >> fn;
  CHECK(recall == 1.0);
  CHECK(tp == 5);
}

TEST_CASE("minimal train invocation with all defaults") {
  TempDir tmp("cli_minimal");
  // long enough that every default-sized segment fits B+F windows and the
  // error-model fit has horizon+1 vectors
  CHECK(run_cli(tmp, "synth --kind sine+noise --n 400 --seed 13 --out " + tmp.path("in.csv"))
            .exit_code == 0);
  RunResult r =
      run_cli(tmp, "train --input " + tmp.path("in.csv") + " --model " + tmp.path("m.json"));
  CHECK(r.exit_code == 0);
  CHECK(!read_file(tmp.path("m.json")).empty());
  const ModelBundle b = load_bundle(tmp.path("m.json"));
  CHECK(b.model.config.lookback == 64);
  CHECK(b.model.config.horizon == 8);
  CHECK(b.percentile == 0.99);
}

TEST_CASE("train rejects an out-of-range percentile naming the flag") {
  TempDir tmp("cli_pct");
  write_file(tmp.path("in.csv"), "timestamp,value\n0,1\n1,2\n2,3\n");
  RunResult r = run_cli(tmp, "train --input " + tmp.path("in.csv") + " --model " +
                                 tmp.path("m.json") + " --percentile 1.5");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("--percentile") != std::string::npos);
}

TEST_CASE("usage errors exit 2, data errors exit 1") {
  TempDir tmp("cli_err");
  CHECK(run_cli(tmp, "").exit_code == 2);                        // missing subcommand
  CHECK(run_cli(tmp, "train").exit_code == 2);                   // missing required flags
  CHECK(run_cli(tmp, "launch --foo 1").exit_code == 2);          // unknown subcommand
  CHECK(run_cli(tmp, "detect --model a --input b").exit_code == 2);  // missing --output

  // a series too short for the windows is a runtime failure
  write_file(tmp.path("short.csv"), "timestamp,value\n0,1\n1,2\n2,3\n");
  const std::string synth_train =
      "synth --kind sine --n 600 --seed 3 --out " + tmp.path("train.csv");
  CHECK(run_cli(tmp, synth_train).exit_code == 0);
  CHECK(run_cli(tmp, "train --input " + tmp.path("train.csv") + " --model " + tmp.path("m.json") +
                         " --kind linear-ar --lookback 16 --horizon 4 --seed 1")
            .exit_code == 0);
  RunResult r = run_cli(tmp, "detect --model " + tmp.path("m.json") + " --input " +
                                 tmp.path("short.csv") + " --output " + tmp.path("r.csv"));
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("SeriesTooShort") != std::string::npos);

  // missing input file is a runtime failure as well
  CHECK(run_cli(tmp, "detect --model " + tmp.path("m.json") + " --input " + tmp.path("nope.csv") +
                         " --output " + tmp.path("r.csv"))
            .exit_code == 1);
}

TEST_CASE("eval prints the documented line for hand-built fixtures") {
  TempDir tmp("cli_eval");

  // perfect match: anomalies exactly at the two labels
  {
    std::ostringstream result;
    result << "timestamp,value,m_distance,status\n";
    for (int t = 0; t < 10; ++t) {
      const bool anom = t == 5 || t == 8;
      result << t << ",0.5,1.0," << (anom ? "anomalous" : "normal") << "\n";
    }
    write_file(tmp.path("perfect.csv"), result.str());
    write_file(tmp.path("labels.csv"), "timestamp\n5\n8\n");
    RunResult r = run_cli(tmp, "eval --result " + tmp.path("perfect.csv") + " --labels " +
                                   tmp.path("labels.csv"));
    CHECK(r.exit_code == 0);
    CHECK(r.out == "1.00 1.00 1.00 2 0 0\n");
  }

  // empty predictions against nonempty labels: recall 0
  {
    std::ostringstream result;
    result << "timestamp,value,m_distance,status\n";
    for (int t = 0; t < 10; ++t) result << t << ",0.5,1.0,normal\n";
    write_file(tmp.path("none.csv"), result.str());
    RunResult r = run_cli(tmp, "eval --result " + tmp.path("none.csv") + " --labels " +
                                   tmp.path("labels.csv"));
    CHECK(r.exit_code == 0);
    CHECK(r.out == "0.00 0.00 0.00 0 0 2\n");
  }

  // tp=147 fp=153 fn=2303 gives exactly P=0.49, R=0.06 and F1 that prints 0.11
  {
    std::ostringstream result, labels;
    result << "timestamp,value,m_distance,status\n";
    labels << "timestamp\n";
    for (int t = 0; t < 6000; ++t) {
      const bool anom = t < 147 || (t >= 3000 && t < 3153);
      result << t << ",0.5,1.0," << (anom ? "anomalous" : "normal") << "\n";
    }
    for (int t = 0; t < 147; ++t) labels << t << "\n";
    for (int t = 3500; t < 5803; ++t) labels << t << "\n";
    write_file(tmp.path("t2.csv"), result.str());
    write_file(tmp.path("t2_labels.csv"), labels.str());
    RunResult r = run_cli(tmp, "eval --result " + tmp.path("t2.csv") + " --labels " +
                                   tmp.path("t2_labels.csv"));
    CHECK(r.exit_code == 0);
    CHECK(r.out == "0.49 0.06 0.11 147 153 2303\n");
  }

  // malformed result file
  write_file(tmp.path("garbage.csv"), "not,a,result\n1,2,3\n");
  CHECK(run_cli(tmp, "eval --result " + tmp.path("garbage.csv") + " --labels " +
                         tmp.path("labels.csv"))
            .exit_code == 1);
}

TEST_CASE("config file supplies defaults and flags win") {
  TempDir tmp("cli_cfg");
  CHECK(run_cli(tmp, "synth --kind sine --n 400 --seed 9 --out " + tmp.path("in.csv"))
            .exit_code == 0);

  write_file(tmp.path("run.cfg"),
             "kind=linear-ar\n"
             "lookback=12\n"
             "horizon=3\n"
             "percentile=0.9\n"
             "seed=21\n");
  RunResult r = run_cli(tmp, "train --input " + tmp.path("in.csv") + " --model " +
                                 tmp.path("m.json") + " --config " + tmp.path("run.cfg") +
                                 " --percentile 0.95");
  CHECK(r.exit_code == 0);
  const ModelBundle bundle = load_bundle(tmp.path("m.json"));
  CHECK(bundle.model.config.lookback == 12);      // from the file
  CHECK(bundle.model.config.seed == 21);          // from the file
  CHECK(bundle.percentile == 0.95);               // flag overrides file
  CHECK(bundle.model.kind == PredictorKind::linear_ar);

  write_file(tmp.path("bad.cfg"), "lookback=12\nwibble=3\n");
  RunResult bad = run_cli(tmp, "train --input " + tmp.path("in.csv") + " --model " +
                                   tmp.path("m2.json") + " --config " + tmp.path("bad.cfg"));
  CHECK(bad.exit_code == 2);
}

TEST_CASE("help exits zero") {
  TempDir tmp("cli_help");
  CHECK(run_cli(tmp, "--help").exit_code == 0);
  CHECK(run_cli(tmp, "train --help").exit_code == 0);
}
