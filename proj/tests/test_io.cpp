// Copyright 2026 The ddscale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddscale/bench.hpp"
#include "ddscale/io/checkpoint.hpp"
#include "ddscale/io/config.hpp"
#include "ddscale/io/matrix_file.hpp"
#include "ddscale/io/oracles.hpp"
#include "ddscale/io/runlog.hpp"
#include "ddscale/io/transform.hpp"
#include "ddscale/simgen.hpp"
#include "support.hpp"

using namespace dds;
using namespace dds::io;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "ddscale-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

bool bit_equal(const DenseMatrix& a, const DenseMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

std::string file_text(const std::string& path) { return io::detail::slurp(path); }

void write_text(const std::string& path, const std::string& text) { io::detail::spit(path, text); }

int cli(const std::string& args) {
  const int status = std::system((std::string(DDSCALE_CLI) + " " + args + " 2>/dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

DenseMatrix awkward_matrix() {
  std::mt19937_64 rng(1);
  DenseMatrix m = ddtest::random_matrix(7, 5, rng, -1e3, 1e3);
  m(0, 0) = -0.0;
  m(1, 1) = 4.9e-324;
  m(2, 2) = 1.7976931348623157e308;
  m(3, 3) = 0.1;
  m(4, 4) = 1.0 / 3.0;
  return m;
}

}  // namespace

// -------------------------------------------------------------- matrix files

TEST(MatrixFile, BinaryRoundTripIsBitExact) {
  MatrixFile m{awkward_matrix(), "content=test\nline two\n"};
  const std::string bytes = encode_binary(m);
  const MatrixFile back = decode_binary(bytes);
  EXPECT_TRUE(bit_equal(back.matrix, m.matrix));
  EXPECT_EQ(back.metadata, m.metadata);
  EXPECT_EQ(bytes.size(), 28 + m.metadata.size() + 35 * 8);
}

TEST(MatrixFile, BinaryHeaderLayout) {
  DenseMatrix one(1, 2);
  one << 1.0, -2.0;
  const std::string b = encode_binary({one, ""});
  EXPECT_EQ(b.substr(0, 4), "DDSM");
  const std::string le_version("\x01\x00\x00\x00", 4), le_one("\x01\0\0\0\0\0\0\0", 8), le_two("\x02\0\0\0\0\0\0\0", 8);
  EXPECT_EQ(b.substr(4, 4), le_version);
  EXPECT_EQ(b.substr(8, 8), le_one);
  EXPECT_EQ(b.substr(16, 8), le_two);
  // 1.0 little-endian.
  EXPECT_EQ(b.substr(28, 8), std::string("\0\0\0\0\0\0\xf0\x3f", 8));
}

TEST(MatrixFile, BinaryErrors) {
  std::string b = encode_binary({awkward_matrix(), "x"});
  std::string bad = b;
  bad[0] = 'X';
  EXPECT_THROW(decode_binary(bad), InvalidInput);
  EXPECT_THROW(decode_binary(b.substr(0, b.size() - 3)), InvalidInput);
  EXPECT_THROW(decode_binary(b + "z"), InvalidInput);
  bad = b;
  bad[4] = 2;
  EXPECT_THROW(decode_binary(bad), InvalidInput);
  DenseMatrix nan = DenseMatrix::Zero(2, 2);
  nan(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(decode_binary(encode_binary({nan, ""})), InvalidInput);
}

TEST(MatrixFile, CsvRoundTripIsBitExact) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::uint64_t> bits;
  DenseMatrix m = awkward_matrix();
  for (Index k = 5; k < m.size(); k += 3) {
    double v;
    do {
      const std::uint64_t u = bits(rng);
      std::memcpy(&v, &u, 8);
    } while (!std::isfinite(v));
    m.data()[k] = v;
  }
  const MatrixFile back = decode_csv(encode_csv({m, "a=1\nb=2\n"}));
  EXPECT_TRUE(bit_equal(back.matrix, m));
  EXPECT_EQ(back.metadata, "a=1\nb=2\n");
}

TEST(MatrixFile, CsvErrorsAndFiles) {
  EXPECT_THROW(decode_csv("c0,c1\n1,2\n3\n"), InvalidInput);
  EXPECT_THROW(decode_csv("c0\nabc\n"), InvalidInput);
  EXPECT_THROW(decode_csv(""), InvalidInput);
  TempDir dir;
  const DenseMatrix m = awkward_matrix();
  for (const char* name : {"m.ddsm", "m.csv"}) {
    write_matrix(dir / name, {m, "k=v\n"});
    EXPECT_TRUE(bit_equal(read_matrix(dir / name).matrix, m)) << name;
  }
  EXPECT_EQ(file_text(dir / "m.csv").substr(0, 6), "# k=v\n");
  EXPECT_THROW(read_matrix(dir / "missing.ddsm"), InvalidInput);
}

// --------------------------------------------------------------- transforms

TEST(Transform, ToDistance) {
  DenseMatrix s(2, 2);
  s << 1.0, 0.25, 0.25, 1.0;
  DenseMatrix want(2, 2);
  want << 0.0, 0.75, 0.75, 0.0;
  EXPECT_TRUE(to_distance(s) == want);
  EXPECT_TRUE(is_metric_similarity(s));
  EXPECT_TRUE(to_distance(s, true) == s);
  DenseMatrix t(2, 2);
  t << 1.0, 0.5, 0.5, 2.0;
  EXPECT_FALSE(is_metric_similarity(t));
  const DenseMatrix x = to_distance(t);
  EXPECT_EQ(x(0, 0), 1.0);
  EXPECT_EQ(x(1, 1), 0.0);
  EXPECT_EQ(x(0, 1), 1.5);
}

TEST(Transform, NeglogShift) {
  EXPECT_TRUE(neglog_shift(DenseMatrix::Constant(3, 3, std::exp(-1.0))) == DenseMatrix::Zero(3, 3));
  DenseMatrix s(1, 2);
  s << 1.0, std::exp(-2.0);
  const DenseMatrix x = neglog_shift(s);
  EXPECT_EQ(x(0, 0), 0.0);
  EXPECT_NEAR(x(0, 1), 2.0, 1e-15);
  std::mt19937_64 rng(3);
  EXPECT_EQ(neglog_shift(ddtest::random_matrix(6, 6, rng, 0.01, 1.0)).minCoeff(), 0.0);
  DenseMatrix bad = DenseMatrix::Ones(2, 3);
  bad(1, 2) = 0.0;
  try {
    neglog_shift(bad);
    FAIL() << "expected an error";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("(1, 2)"), std::string::npos) << e.what();
  }
}

TEST(Transform, LoadPrecomputed) {
  TempDir dir;
  DenseMatrix s(2, 2);
  s << 1.0, 0.25, 0.25, 1.0;
  write_matrix(dir / "s.ddsm", {s, ""});
  EXPECT_TRUE(load_precomputed(dir / "s.ddsm", "none") == s);
  EXPECT_TRUE(load_precomputed(dir / "s.ddsm", "similarity") == to_distance(s));
  EXPECT_TRUE(load_precomputed(dir / "s.ddsm", "neglog_shift") == neglog_shift(s));
  EXPECT_THROW(load_precomputed(dir / "s.ddsm", "log"), ConfigError);
}

// ------------------------------------------------------------------ oracles

TEST(FeatureOracle, MetricsAndTransforms) {
  std::mt19937_64 rng(4);
  const DenseMatrix f = ddtest::random_matrix(6, 9, rng);
  FeatureOracle euc(f, FeatureMetric::Euclidean, SimilarityTransform::None, 2.0);
  const DenseMatrix d = sim::distance_matrix(f);
  for (ObjectId i = 0; i < 6; ++i) {
    const auto row = euc.row(i);
    for (ObjectId j = 0; j < 6; ++j) EXPECT_NEAR(row[static_cast<std::size_t>(j)], d(i, j), 1e-14);
  }
  EXPECT_EQ(euc.element_cost(), 2.0);
  EXPECT_THROW(euc.row(6), OracleError);

  FeatureOracle cor(f, FeatureMetric::OneMinusCorrelation, SimilarityTransform::None);
  std::vector<double> a, b;
  for (Index k = 0; k < 9; ++k) a.push_back(f(1, k)), b.push_back(f(4, k));
  EXPECT_NEAR(cor.element(1, 4), 1.0 - ddtest::pearson(a, b), 1e-12);
  EXPECT_EQ(cor.element(3, 3), 0.0);

  EXPECT_THROW(FeatureOracle(f, FeatureMetric::Euclidean, SimilarityTransform::NeglogShift), ConfigError);
  // Positively correlated rows, so neglog applies.
  DenseMatrix g(3, 4);
  g << 1, 2, 3, 4,  //
      2, 4, 6, 9,   //
      1, 3, 2, 5;
  FeatureOracle pos(g, FeatureMetric::OneMinusCorrelation, SimilarityTransform::NeglogShift);
  // The largest correlation is the diagonal 1, so it maps to the shift minimum.
  EXPECT_NEAR(pos.element(0, 0), 0.0, 1e-12);
  EXPECT_GT(pos.element(0, 2), pos.element(0, 1));
}

TEST(ExternalOracle, EchoStub) {
  ExternalConfig c;
  c.command = "echo 0 1 2 # {i}";
  c.n = 3;
  ExternalOracle o(c);
  EXPECT_EQ(o.row(1), (std::vector<double>{0, 1, 2}));
  EXPECT_EQ(o.element(0, 2), 2.0);
  c.command = "printf '%s,%s\\n' {i} 7";
  c.n = 2;
  EXPECT_EQ(ExternalOracle(c).row(1), (std::vector<double>{1, 7}));
}

TEST(ExternalOracle, ElementCommandAndTransform) {
  ExternalConfig c;
  c.command = "echo 1 1 # {i}";
  c.element_command = "echo 0.5 # {i} {j}";
  c.n = 2;
  c.transform = SimilarityTransform::NeglogShift;
  c.offset = 0.25;
  ExternalOracle o(c);
  EXPECT_NEAR(o.element(0, 1), std::log(2.0) + 0.25, 1e-15);
  EXPECT_EQ(o.row(0), (std::vector<double>{0.25, 0.25}));
  c.element_command = "echo {i}";
  EXPECT_THROW(ExternalOracle{c}, ConfigError);
  c.command = "echo 1 1";
  c.element_command.clear();
  EXPECT_THROW(ExternalOracle{c}, ConfigError);
}

TEST(ExternalOracle, Failures) {
  ExternalConfig c;
  c.command = "echo 0 1 # {i}";
  c.n = 3;
  EXPECT_THROW(ExternalOracle(c).row(0), OracleError);
  c.command = "echo oops >&2; exit 3 # {i}";
  try {
    ExternalOracle(c).row(0);
    FAIL() << "expected an error";
  } catch (const OracleError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("status 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("stderr: oops"), std::string::npos) << msg;
  }
  c.command = "echo 0 x 2 # {i}";
  EXPECT_THROW(ExternalOracle(c).row(0), OracleError);
  c.command = "echo 0 1 2 # {i}";
  EXPECT_THROW(ExternalOracle(c).row(3), OracleError);
  c.n = 0;
  EXPECT_THROW(ExternalOracle{c}, ConfigError);
}

TEST(ExternalOracle, TimingCoversSlowCommands) {
  ExternalConfig c;
  c.command = "sleep 0.05; echo 1 2 # {i}";
  c.n = 2;
  ExternalOracle o(c);
  o.row(0);
  EXPECT_GE(o.last_seconds(), 0.05);
  // Engine evaluation timing sees the same delay.
  RunConfig rc;
  rc.strategy = Strategy::RANDOM;
  rc.budget.t_max = 1;
  rc.seed = 1;
  ExternalConfig d;
  d.command = "sleep 0.05; echo 0 1 # {i}";
  d.n = 2;
  ExternalOracle od(d);
  Engine e(od, rc);
  EXPECT_GE(e.step().evaluation_seconds, 0.05);
}

TEST(ParseNumbers, Separators) {
  EXPECT_EQ(parse_numbers(" 1,2\t3\n4e-1 , -5 "), (std::vector<double>{1, 2, 3, 0.4, -5}));
  EXPECT_TRUE(parse_numbers("").empty());
  EXPECT_THROW(parse_numbers("1 2x"), OracleError);
}

// ------------------------------------------------------------------- config

TEST(Config, ParseAndOverride) {
  Config c = Config::parse("# run\nseed = 4\nbudget.t_max=10  # inline\n\nchoice.strategy = furthest\n");
  c.set("choice.strategy=random");
  c.set("emulator.kind = nn");
  const RunConfig r = run_config(c);
  EXPECT_EQ(r.seed, 4u);
  EXPECT_EQ(*r.budget.t_max, 10);
  EXPECT_EQ(r.strategy, Strategy::RANDOM);
  EXPECT_EQ(r.emulator, EmulatorKind::NN);
}

TEST(Config, StrictErrors) {
  EXPECT_THROW(Config::parse("seeed = 1\n"), ConfigError);
  EXPECT_THROW(Config::parse("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(Config::parse("seed 1\n"), ConfigError);
  Config c;
  EXPECT_THROW(c.set("choice.strategi=random"), ConfigError);
  EXPECT_THROW(run_config(Config::parse("budget.t_max = 3\n")), ConfigError);
  EXPECT_THROW(run_config(Config::parse("seed = 1\n")), ConfigError);
  EXPECT_THROW(run_config(Config::parse("seed = 1\nbudget.t_max = x\n")), ConfigError);
  EXPECT_THROW(run_config(Config::parse("seed = 1\nbudget.t_max = 3\nchoice.strategy = best\n")), ConfigError);
  EXPECT_THROW(run_config(Config::parse("seed = 1\nbudget.t_max = 3\nloss.weight = threshold\n")), ConfigError);
  EXPECT_THROW(run_config(Config::parse("seed = 1\nbudget.t_max = 3\nbudget.cost = 9\n")), ConfigError);
}

TEST(Config, MakeOracle) {
  TempDir dir;
  std::mt19937_64 rng(5);
  const DenseMatrix x = ddtest::random_matrix(4, 4, rng);
  write_matrix(dir / "x.ddsm", {x, ""});
  auto o = make_oracle(Config::parse("oracle.path = " + (dir / "x.ddsm") + "\noracle.element_cost = 3\n"));
  EXPECT_EQ(o->size(), 4);
  EXPECT_EQ(o->element_cost(), 3.0);
  const auto row = o->row(2);
  for (Index j = 0; j < 4; ++j) EXPECT_EQ(row[static_cast<std::size_t>(j)], x(2, j));
  EXPECT_THROW(make_oracle(Config::parse("oracle.kind = precomputed\n")), ConfigError);
  EXPECT_THROW(make_oracle(Config::parse("oracle.path = a\noracle.command = b\n")), ConfigError);
  EXPECT_THROW(make_oracle(Config::parse("oracle.kind = external\noracle.command = echo {i}\n")), ConfigError);
  EXPECT_THROW(make_oracle(Config::parse("oracle.kind = magic\n")), ConfigError);
  auto ext = make_oracle(Config::parse("oracle.kind = external\noracle.command = echo 0 1 {i}\noracle.n = 3\n"));
  EXPECT_EQ(ext->kind(), OracleKind::EXTERNAL);
  auto feat = make_oracle(Config::parse("oracle.kind = features\noracle.path = " + (dir / "x.ddsm") +
                                        "\noracle.metric = one_minus_correlation\n"));
  EXPECT_EQ(feat->kind(), OracleKind::FEATURES);
}

TEST(Config, Labels) {
  TempDir dir;
  write_text(dir / "l.txt", "0 1\n2\n");
  EXPECT_EQ(read_labels(dir / "l.txt"), (std::vector<int>{0, 1, 2}));
  write_text(dir / "bad.txt", "0 x\n");
  EXPECT_THROW(read_labels(dir / "bad.txt"), ConfigError);
}

// ------------------------------------------------------------------ run log

TEST(RunLog, Schema) {
  EXPECT_EQ(runlog_columns(),
            (std::vector<std::string>{"iteration", "t", "action", "i", "j", "rmse", "delta_pred", "delta_obs",
                                      "delta_error", "cumulative_cost", "gamma_fallback", "true_rmse",
                                      "decision_seconds", "evaluation_seconds", "assessment_seconds"}));
  std::mt19937_64 rng(6);
  const DenseMatrix x = ddtest::random_matrix(8, 8, rng, 0.1, 1.0);
  for (bool timing : {false, true}) {
    MatrixOracle o(x);
    RunConfig rc;
    rc.budget.t_max = 5;
    rc.seed = 2;
    Engine e(o, rc);
    std::ostringstream out;
    RunLogWriter w(out, timing);
    e.run([&](const RunRecord& r) { w.write(r); });
    const auto ls = lines(out.str());
    ASSERT_EQ(ls.size(), 6u);
    EXPECT_EQ(ls[0], "iteration,t,action,i,j,rmse,delta_pred,delta_obs,delta_error,cumulative_cost,gamma_fallback,"
                     "true_rmse,decision_seconds,evaluation_seconds,assessment_seconds");
    for (std::size_t k = 1; k < ls.size(); ++k) {
      EXPECT_EQ(std::count(ls[k].begin(), ls[k].end(), ','), 14);
      const bool na_timing = ls[k].size() >= 9 && ls[k].substr(ls[k].size() - 9) == ",NA,NA,NA";
      EXPECT_EQ(na_timing, !timing) << ls[k];
    }
    EXPECT_EQ(ls[1].substr(0, 11), "1,1,global,");
  }
}

// --------------------------------------------------------------- checkpoint

namespace {

// Runs `rc` straight through and again with a checkpoint after `split`
// steps; returns both RunLogs.
std::pair<std::string, std::string> split_run(const DenseMatrix& x, const RunConfig& rc, Index split,
                                              const std::string& prefix) {
  MatrixOracle full_oracle(x);
  Engine full(full_oracle, rc);
  std::ostringstream full_log;
  RunLogWriter fw(full_log, false);
  full.run([&](const RunRecord& r) { fw.write(r); });

  MatrixOracle first_oracle(x);
  Engine first(first_oracle, rc);
  std::ostringstream resumed_log;
  RunLogWriter rw(resumed_log, false);
  while (first.iteration() < split) rw.write(first.step());
  write_checkpoint(prefix, first);

  const Checkpoint ck = read_checkpoint(prefix);
  EXPECT_EQ(ck.iteration, first.iteration());
  EXPECT_EQ(ck.rng_state, first.rng_state());
  EXPECT_TRUE(std::ranges::equal(ck.state.evaluated(), first.state().evaluated()));
  for (ObjectId i : ck.state.evaluated())
    EXPECT_TRUE(std::ranges::equal(ck.state.row_of(i), first.state().row_of(i)));
  EXPECT_EQ(ck.state.local_elements(), first.state().local_elements());
  EXPECT_EQ(ck.state.local_evaluations(), first.state().local_evaluations());
  EXPECT_EQ(ck.state.spent_cost(), first.state().spent_cost());
  EXPECT_EQ(ck.gamma.coef, first.gamma().coef);
  EXPECT_EQ(ck.gamma.fallback, first.gamma().fallback);
  EXPECT_EQ(ck.history.records.size(), first.history().records.size());

  MatrixOracle second_oracle(x);
  Engine second(second_oracle, rc);
  resume(second, ck);
  second.run([&](const RunRecord& r) { rw.write(r); });
  return {full_log.str(), resumed_log.str()};
}

}  // namespace

TEST(Checkpoint, ResumeEqualsUninterruptedRun) {
  TempDir dir;
  const auto ds = sim::simulate(sim::SimSpec::from_difficulty(6, 3, 80, 100, 10));
  RunConfig rc;
  rc.budget.t_max = 25;
  rc.seed = 8;
  auto [a, b] = split_run(ds.distances, rc, 10, dir / "ck");
  EXPECT_EQ(a, b);
  EXPECT_EQ(lines(a).size(), 26u);
}

TEST(Checkpoint, ResumeWithLocalElements) {
  TempDir dir;
  const auto ds = sim::simulate(sim::SimSpec::from_difficulty(6, 3, 80, 100, 10));
  RunConfig rc;
  rc.budget.t_max = 12;
  rc.seed = 9;
  rc.local_search = true;
  rc.loss.norm = LossNorm::LInf;
  rc.loss.cost_coefficient = 1e-7;
  auto [a, b] = split_run(ds.distances, rc, 100, dir / "ck");
  EXPECT_EQ(a, b);
  EXPECT_NE(a.find(",local,"), std::string::npos);
}

TEST(Checkpoint, Errors) {
  TempDir dir;
  const auto ds = sim::simulate(sim::SimSpec::from_difficulty(1, 3, 40, 50, 4));
  RunConfig rc;
  rc.budget.t_max = 5;
  rc.seed = 1;
  MatrixOracle o(ds.distances);
  Engine e(o, rc);
  e.run();
  write_checkpoint(dir / "ck", e);
  RunConfig other = rc;
  other.emulator = EmulatorKind::NN;
  MatrixOracle o2(ds.distances);
  Engine nn(o2, other);
  EXPECT_THROW(resume(nn, read_checkpoint(dir / "ck")), ConfigError);
  EXPECT_THROW(read_checkpoint(dir / "nothing"), InvalidInput);
  write_text(dir / "bad.json", "{\"format\": \"other\"}");
  EXPECT_THROW(read_checkpoint(dir / "bad"), InvalidInput);
}

// ---------------------------------------------------------------------- CLI

TEST(Cli, SimulateIsByteIdentical) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --difficulty 1 --seed 7 --n 60 --features 80 --out " + (dir / "a")), 0);
  ASSERT_EQ(cli("simulate --difficulty 1 --seed 7 --n 60 --features 80 --workers 3 --out " + (dir / "b")), 0);
  for (const char* part : {".features.ddsm", ".distances.ddsm", ".labels.txt"})
    EXPECT_EQ(file_text(dir / (std::string("a") + part)), file_text(dir / (std::string("b") + part))) << part;
  ASSERT_EQ(cli("simulate --difficulty 1 --seed 8 --n 60 --features 80 --out " + (dir / "c")), 0);
  EXPECT_NE(file_text(dir / "a.distances.ddsm"), file_text(dir / "c.distances.ddsm"));
  EXPECT_NE(cli("simulate --difficulty 1 --n 60"), 0);
  EXPECT_NE(cli("simulate --difficulty 12 --seed 1"), 0);
}

TEST(Cli, ValidationBeforeOracleCalls) {
  TempDir dir;
  const std::string marker = dir / "called";
  const std::string cmd = "oracle.command=touch " + marker + "; echo 0 0 0 # {i}";
  const std::string base = "run --set oracle.kind=external --set oracle.n=3 --set \"" + cmd + "\" --log " + (dir / "log.csv");
  EXPECT_EQ(cli(base + " --seed 1 --set budget.t_max=4"), 2);
  EXPECT_EQ(cli(base + " --seed 1 --set budget.t_max=2 --set budget.cost=5"), 2);
  EXPECT_EQ(cli(base + " --set budget.t_max=2"), 2);
  EXPECT_EQ(cli(base + " --seed 1 --set budget.tmax=2"), 2);
  EXPECT_FALSE(fs::exists(marker));
  EXPECT_EQ(cli(base + " --seed 1 --set budget.t_max=1"), 0);
  EXPECT_TRUE(fs::exists(marker));
}

TEST(Cli, RunLogsAndCompletionAreReproducible) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --difficulty 6 --seed 2 --n 80 --features 100 --out " + (dir / "d")), 0);
  write_text(dir / "run.cfg", "oracle.path = " + (dir / "d.distances.ddsm") + "\nbudget.t_max = 15\nseed = 4\n");
  for (const char* tag : {"1", "2"}) {
    ASSERT_EQ(cli("run --config " + (dir / "run.cfg") + " --log " + (dir / (std::string("log") + tag + ".csv")) +
                  " --complete " + (dir / (std::string("c") + tag + ".ddsm")) + " --checkpoint " +
                  (dir / (std::string("ck") + tag))),
              0);
  }
  EXPECT_EQ(file_text(dir / "log1.csv"), file_text(dir / "log2.csv"));
  EXPECT_EQ(file_text(dir / "c1.ddsm"), file_text(dir / "c2.ddsm"));
  EXPECT_EQ(file_text(dir / "ck1.json"), file_text(dir / "ck2.json"));
  EXPECT_EQ(lines(file_text(dir / "log1.csv")).size(), 16u);

  // Rebuilding from the checkpoint starts the fits cold, so it agrees to roundoff.
  ASSERT_EQ(cli("complete --checkpoint " + (dir / "ck1") + " --out " + (dir / "c3.ddsm")), 0);
  const DenseMatrix live = read_matrix(dir / "c1.ddsm").matrix, cold = read_matrix(dir / "c3.ddsm").matrix;
  EXPECT_LE((live - cold).cwiseAbs().maxCoeff(), 1e-10);

  // Resume to 25 rows equals a straight 25-row run.
  ASSERT_EQ(cli("run --config " + (dir / "run.cfg") + " --set budget.t_max=25 --resume " + (dir / "ck1") +
                " --log " + (dir / "tail.csv")),
            0);
  ASSERT_EQ(cli("run --config " + (dir / "run.cfg") + " --set budget.t_max=25 --log " + (dir / "straight.csv")), 0);
  auto straight = lines(file_text(dir / "straight.csv"));
  auto head = lines(file_text(dir / "log1.csv"));
  auto tail = lines(file_text(dir / "tail.csv"));
  head.insert(head.end(), tail.begin() + 1, tail.end());
  EXPECT_EQ(head, straight);
}

TEST(Cli, PipelineBeatsRandomBaseline) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --difficulty 1 --seed 11 --out " + (dir / "d")), 0);
  ASSERT_EQ(cli("run --seed 5 --set oracle.path=" + (dir / "d.distances.ddsm") +
                " --set budget.t_max=50 --log " + (dir / "log.csv") + " --checkpoint " + (dir / "ck")),
            0);
  ASSERT_EQ(cli("complete --checkpoint " + (dir / "ck") + " --out " + (dir / "c.ddsm")), 0);
  ASSERT_EQ(cli("bench perf --seed 3 --difficulties 1 --methods random+mm --replicates 5 --checkpoints 50 --out " +
                (dir / "perf.csv")),
            0);
  std::ifstream pf(dir / "perf.csv");
  const double baseline = bench::mean_rmse_at(bench::read_perf_csv(pf), 1, {Strategy::RANDOM, EmulatorKind::MM}, 50);
  const Checkpoint ck = read_checkpoint(dir / "ck");
  const double rmse =
      true_rmse(read_matrix(dir / "c.ddsm").matrix, read_matrix(dir / "d.distances.ddsm").matrix, evaluated_mask(ck.state));
  EXPECT_LT(rmse, baseline);
}

TEST(Cli, BenchTablesAndAr1) {
  TempDir dir;
  ASSERT_EQ(cli("bench perf --seed 1 --n 40 --features 50 --clusters 4 --t-max 10 --replicates 2 --checkpoints 5 10 "
                "--out " + (dir / "p.csv")),
            0);
  ASSERT_EQ(cli("bench scaling --seed 1 --n-values 40 80 --t-values 5 10 --repeats 1 --out " + (dir / "s.csv")), 0);
  ASSERT_EQ(cli("bench scenario --perf " + (dir / "p.csv") + " --scaling " + (dir / "s.csv") +
                " --n 40 --scenario big:0.1:1 --out " + (dir / "sc.csv")),
            0);
  EXPECT_EQ(lines(file_text(dir / "sc.csv")).size(), 1u + 2u * 2u);
  EXPECT_NE(cli("bench scenario --perf " + (dir / "p.csv") + " --scaling " + (dir / "s.csv") +
                " --scenario big:0.1:4 --out " + (dir / "x.csv")),
            0);
  ASSERT_EQ(cli("ar1 --seed 2 --m 12 --t 3 --reps 100 --out " + (dir / "a.csv")), 0);
  const auto ar = lines(file_text(dir / "a.csv"));
  ASSERT_EQ(ar.size(), 5u);
  EXPECT_EQ(ar[0], "strategy,T,exact_variance,mc_variance");
  EXPECT_EQ(ar[4].substr(0, 14), "brute_force,3,");
  EXPECT_NE(cli("ar1 --m 12"), 0);
}

TEST(Cli, PerfTableRoundTrips) {
  bench::PerfPlan p;
  p.difficulties = {1};
  p.n = 30;
  p.features = 40;
  p.clusters = 3;
  p.t_max = 6;
  p.replicates = 2;
  const auto rows = bench::run_performance_grid(p);
  std::stringstream s;
  bench::write_perf_csv(s, rows);
  const auto back = bench::read_perf_csv(s);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(back[k].mean_rmse, rows[k].mean_rmse);
    EXPECT_EQ(back[k].t, rows[k].t);
  }
}
