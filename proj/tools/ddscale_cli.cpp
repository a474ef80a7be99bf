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

// ddscale command-line front end.
//
//   ddscale simulate --difficulty 1 --seed 7 --out data/d1
//   ddscale run --config run.cfg --set budget.t_max=50 --log run.csv --complete done.ddsm
//   ddscale complete --checkpoint state --out done.ddsm
//   ddscale bench perf|scaling|scenario ...
//   ddscale ar1 --seed 3 --out ar1.csv

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "ddscale/ar1.hpp"
#include "ddscale/bench.hpp"
#include "ddscale/engine.hpp"
#include "ddscale/io/checkpoint.hpp"
#include "ddscale/io/config.hpp"
#include "ddscale/io/matrix_file.hpp"
#include "ddscale/io/runlog.hpp"
#include "ddscale/simgen.hpp"

namespace {

using namespace dds;

/// "-" is standard output.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
    if (!*file_) throw InvalidInput("cannot write " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string ext(const std::string& format) { return format == "csv" ? ".csv" : ".ddsm"; }

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
  int difficulty = 1;
  std::uint64_t seed = 0;
  Index n = 500;
  Index features = 1000;
  Index clusters = 10;
  unsigned workers = 1;
  std::string out = "sim";
  std::string format = "binary";
};

void simulate_cmd(const SimulateArgs& a) {
  const auto ds = sim::simulate(sim::SimSpec::from_difficulty(a.difficulty, a.seed, a.n, a.features, a.clusters), a.workers);
  std::ostringstream meta;
  meta << "difficulty=" << a.difficulty << "\nseed=" << a.seed << "\nclusters=" << a.clusters << "\n";
  io::write_matrix(a.out + ".features" + ext(a.format), {ds.features, meta.str() + "content=features\n"});
  io::write_matrix(a.out + ".distances" + ext(a.format),
                   {ds.distances, meta.str() + "content=distances\ntransform=none\n"});
  std::ofstream labels(a.out + ".labels.txt", std::ios::trunc);
  if (!labels) throw InvalidInput("cannot write " + a.out + ".labels.txt");
  for (int l : ds.labels) labels << l << "\n";
}

// ----------------------------------------------------------------------- run

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string log = "-";
  std::string complete;
  std::string delta;
  std::string checkpoint;
  std::string resume;
};

void write_completion(const Completion& c, const std::string& matrix_path, const std::string& delta_path,
                      const std::string& note) {
  if (!matrix_path.empty()) io::write_matrix(matrix_path, {c.matrix, note});
  if (!delta_path.empty()) io::write_matrix(delta_path, {DenseMatrix(c.delta), note + "content=delta\n"});
}

void run_cmd(const RunArgs& a) {
  io::Config cfg = a.config.empty() ? io::Config{} : io::Config::load(a.config);
  for (const auto& s : a.sets) cfg.set(s);
  if (a.seed) cfg.set("seed=" + std::to_string(*a.seed));
  const RunConfig rc = io::run_config(cfg);
  auto oracle = io::make_oracle(cfg);
  Engine engine(*oracle, rc);

  DenseMatrix truth;
  if (auto path = cfg.str("benchmark.truth")) {
    truth = io::read_matrix(*path).matrix;
    if (truth.rows() != oracle->size() || truth.cols() != oracle->size())
      throw ConfigError("benchmark.truth: matrix size does not match the oracle");
    engine.set_benchmark({&truth, {}});
  }
  if (!a.resume.empty()) {
    const io::Checkpoint ck = io::read_checkpoint(a.resume);
    if (ck.state.size() != oracle->size()) throw ConfigError("resume: checkpoint N differs from the oracle");
    io::resume(engine, ck);
  }

  Output log(a.log);
  io::RunLogWriter writer(log.stream(), cfg.boolean("log.timing").value_or(false));
  engine.run([&](const RunRecord& r) { writer.write(r); });

  if (!a.checkpoint.empty()) io::write_checkpoint(a.checkpoint, engine);
  if (!a.complete.empty() || !a.delta.empty())
    write_completion(engine.complete(), a.complete, a.delta, std::string("emulator=") + to_string(rc.emulator) + "\n");
}

// ------------------------------------------------------------------ complete

struct CompleteArgs {
  std::string checkpoint;
  std::string out;
  std::string delta;
};

void complete_cmd(const CompleteArgs& a) {
  const io::Checkpoint ck = io::read_checkpoint(a.checkpoint);
  Emulator em(ck.emulator, ck.state.size());
  write_completion(complete_matrix(ck.state, em, ck.gamma), a.out, a.delta,
                   std::string("emulator=") + to_string(ck.emulator) + "\n");
}

// --------------------------------------------------------------------- bench

std::vector<bench::Method> methods_from(const std::vector<std::string>& names) {
  std::vector<bench::Method> out;
  for (const auto& n : names) out.push_back(bench::parse_method(n));
  return out;
}

struct PerfArgs {
  std::uint64_t seed = 0;
  std::vector<int> difficulties{1, 6, 11};
  std::vector<std::string> methods{"rmse_loss+mm", "random+mm"};
  Index n = 500;
  Index features = 1000;
  Index clusters = 10;
  Index t_max = 50;
  Index replicates = 20;
  std::vector<Index> checkpoints;
  unsigned workers = 1;
  std::string out = "-";
};

void perf_cmd(const PerfArgs& a) {
  bench::PerfPlan p;
  p.difficulties = a.difficulties;
  p.methods = methods_from(a.methods);
  p.n = a.n;
  p.features = a.features;
  p.clusters = a.clusters;
  p.t_max = a.t_max;
  p.replicates = a.replicates;
  p.checkpoints = a.checkpoints;
  p.workers = a.workers;
  p.seed = a.seed;
  Output out(a.out);
  bench::write_perf_csv(out.stream(), bench::run_performance_grid(p));
}

struct ScalingArgs {
  std::uint64_t seed = 0;
  std::vector<std::string> methods{"random+mm", "furthest+mm", "rmse_loss+mm", "rmse_loss+nn"};
  std::vector<Index> n_values{250, 500, 1000, 2000};
  std::vector<Index> t_values{10, 25, 50};
  Index p_cap = 80;
  Index repeats = 3;
  std::string out = "-";
};

void scaling_cmd(const ScalingArgs& a) {
  bench::ScalingPlan p;
  p.methods = methods_from(a.methods);
  p.n_values = a.n_values;
  p.t_values = a.t_values;
  p.p_cap = a.p_cap;
  p.repeats = a.repeats;
  p.seed = a.seed;
  Output out(a.out);
  const auto rows = bench::run_scaling_grid(p);
  bench::write_scaling_csv(out.stream(), rows);
  for (const auto& m : p.methods) {
    std::cerr << bench::label(m) << ": slope vs N at T_max=" << p.t_values.back() << " "
              << bench::slope_vs_n(rows, m, p.t_values.back()) << ", slope vs T_max at N=" << p.n_values.back() << " "
              << bench::slope_vs_t(rows, m, p.n_values.back()) << "\n";
  }
}

struct ScenarioArgs {
  std::string perf;
  std::string scaling;
  Index n = 500;
  std::vector<std::string> scenarios;
  std::string out = "-";
};

// name:seconds_per_element:difficulty
bench::Scenario parse_scenario(const std::string& s) {
  std::vector<std::string> parts;
  std::istringstream in(s);
  for (std::string p; std::getline(in, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw InvalidInput("scenario '" + s + "' must look like name:seconds:difficulty");
  return {parts[0], std::stod(parts[1]), std::stoi(parts[2])};
}

void scenario_cmd(const ScenarioArgs& a) {
  std::ifstream pf(a.perf), sf(a.scaling);
  if (!pf) throw InvalidInput("cannot open " + a.perf);
  if (!sf) throw InvalidInput("cannot open " + a.scaling);
  std::vector<bench::Scenario> sc;
  for (const auto& s : a.scenarios) sc.push_back(parse_scenario(s));
  if (sc.empty()) sc = bench::default_scenarios();
  Output out(a.out);
  bench::write_scenario_csv(out.stream(),
                            bench::scenario_curves(sc, a.n, bench::read_perf_csv(pf), bench::read_scaling_csv(sf)));
}

// ----------------------------------------------------------------------- ar1

struct Ar1Args {
  std::uint64_t seed = 0;
  double psi = 0.0;
  double phi = 0.9;
  double sigma = 1.0;
  Index m = 1000;
  std::vector<Index> t_values{10};
  Index reps = 2000;
  std::string out = "-";
};

void ar1_cmd(const Ar1Args& a) {
  ar1::Ar1Spec spec;
  spec.psi = a.psi;
  spec.phi = a.phi;
  spec.sigma_eps = a.sigma;
  spec.m = a.m;
  spec.seed = a.seed;
  spec.validate();
  Output out(a.out);
  out.stream() << "strategy,T,exact_variance,mc_variance\n";
  auto row = [&](const char* name, Index t, const std::vector<Index>& idx) {
    out.stream() << name << ',' << t << ',' << io::fmt_num(ar1::subset_variance(idx, spec)) << ','
                 << io::fmt_num(ar1::monte_carlo_variance(idx, spec, a.reps)) << "\n";
  };
  for (Index t : a.t_values) {
    row("prefix", t, ar1::select_prefix(a.m, t));
    row("thinning", t, ar1::select_thinning(a.m, t));
    row("greedy", t, ar1::select_greedy(a.m, t));
    if (ar1::binomial(a.m, t) <= 1e6) row("brute_force", t, ar1::brute_force_best(a.m, t, spec));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active matrix completion by data directional scaling"};
  app.require_subcommand(1);

  SimulateArgs sim_a;
  auto* sim = app.add_subcommand("simulate", "Generate a clustered Gaussian feature set and its distance matrix");
  sim->add_option("--difficulty", sim_a.difficulty, "Difficulty level")->required()->check(CLI::Range(1, 11));
  sim->add_option("--seed", sim_a.seed, "Random seed")->required();
  sim->add_option("--n", sim_a.n, "Number of objects")->capture_default_str();
  sim->add_option("--features", sim_a.features, "Number of features")->capture_default_str();
  sim->add_option("--clusters", sim_a.clusters, "Number of clusters")->capture_default_str();
  sim->add_option("--workers", sim_a.workers, "Sampling threads")->capture_default_str();
  sim->add_option("--out", sim_a.out, "Output prefix")->capture_default_str();
  sim->add_option("--format", sim_a.format, "Matrix file format")
      ->check(CLI::IsMember({"binary", "csv"}))
      ->capture_default_str();

  RunArgs run_a;
  auto* run = app.add_subcommand("run", "Run the active completion loop against an oracle");
  run->add_option("--config", run_a.config, "Key = value configuration file")->check(CLI::ExistingFile);
  run->add_option("--set", run_a.sets, "Override, key=value (repeatable)");
  run->add_option("--seed", run_a.seed, "Random seed (required here or in the configuration)");
  run->add_option("--log", run_a.log, "RunLog CSV path, - for stdout")->capture_default_str();
  run->add_option("--complete", run_a.complete, "Write the completed matrix here");
  run->add_option("--delta", run_a.delta, "Write predicted row errors here");
  run->add_option("--checkpoint", run_a.checkpoint, "Write a checkpoint with this prefix at the end");
  run->add_option("--resume", run_a.resume, "Resume from the checkpoint with this prefix");

  CompleteArgs comp_a;
  auto* comp = app.add_subcommand("complete", "Complete a matrix from a checkpoint");
  comp->add_option("--checkpoint", comp_a.checkpoint, "Checkpoint prefix")->required();
  comp->add_option("--out", comp_a.out, "Completed matrix path")->required();
  comp->add_option("--delta", comp_a.delta, "Predicted row error path");

  auto* bench_cmd = app.add_subcommand("bench", "Benchmark tables");
  bench_cmd->require_subcommand(1);

  PerfArgs perf_a;
  auto* perf = bench_cmd->add_subcommand("perf", "Replicate-mean RMSE curves on simulated data");
  perf->add_option("--seed", perf_a.seed, "Random seed")->required();
  perf->add_option("--difficulties", perf_a.difficulties, "Difficulty levels")->capture_default_str();
  perf->add_option("--methods", perf_a.methods, "strategy+emulator pairs")->capture_default_str();
  perf->add_option("--n", perf_a.n, "Number of objects")->capture_default_str();
  perf->add_option("--features", perf_a.features, "Number of features")->capture_default_str();
  perf->add_option("--clusters", perf_a.clusters, "Number of clusters")->capture_default_str();
  perf->add_option("--t-max", perf_a.t_max, "Rows evaluated per run")->capture_default_str();
  perf->add_option("--replicates", perf_a.replicates, "Datasets per difficulty")->capture_default_str();
  perf->add_option("--checkpoints", perf_a.checkpoints, "t values to assess (default: every t)");
  perf->add_option("--workers", perf_a.workers, "Parallel replicates")->capture_default_str();
  perf->add_option("--out", perf_a.out, "CSV path, - for stdout")->capture_default_str();

  ScalingArgs scal_a;
  auto* scal = bench_cmd->add_subcommand("scaling", "Decision time against N and T_max");
  scal->add_option("--seed", scal_a.seed, "Random seed")->required();
  scal->add_option("--methods", scal_a.methods, "strategy+emulator pairs")->capture_default_str();
  scal->add_option("--n-values", scal_a.n_values, "N grid")->capture_default_str();
  scal->add_option("--t-values", scal_a.t_values, "T_max grid")->capture_default_str();
  scal->add_option("--p-cap", scal_a.p_cap, "Candidate cap")->capture_default_str();
  scal->add_option("--repeats", scal_a.repeats, "Timing repeats per cell")->capture_default_str();
  scal->add_option("--out", scal_a.out, "CSV path, - for stdout")->capture_default_str();

  ScenarioArgs scen_a;
  auto* scen = bench_cmd->add_subcommand("scenario", "Total-cost curves from perf and scaling tables");
  scen->add_option("--perf", scen_a.perf, "Performance CSV")->required();
  scen->add_option("--scaling", scen_a.scaling, "Scaling CSV")->required();
  scen->add_option("--n", scen_a.n, "N used for the perf table")->capture_default_str();
  scen->add_option("--scenario", scen_a.scenarios, "name:seconds_per_element:difficulty (repeatable)");
  scen->add_option("--out", scen_a.out, "CSV path, - for stdout")->capture_default_str();

  Ar1Args ar1_a;
  auto* ar = app.add_subcommand("ar1", "Subsampling an AR(1) series: exact and Monte Carlo variances");
  ar->add_option("--seed", ar1_a.seed, "Random seed")->required();
  ar->add_option("--psi", ar1_a.psi, "Intercept")->capture_default_str();
  ar->add_option("--phi", ar1_a.phi, "Autoregression coefficient")->capture_default_str();
  ar->add_option("--sigma", ar1_a.sigma, "Innovation standard deviation")->capture_default_str();
  ar->add_option("--m", ar1_a.m, "Series length")->capture_default_str();
  ar->add_option("--t", ar1_a.t_values, "Subset sizes")->capture_default_str();
  ar->add_option("--reps", ar1_a.reps, "Monte Carlo replicates")->capture_default_str();
  ar->add_option("--out", ar1_a.out, "CSV path, - for stdout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) simulate_cmd(sim_a);
    else if (*run) run_cmd(run_a);
    else if (*comp) complete_cmd(comp_a);
    else if (*perf) perf_cmd(perf_a);
    else if (*scal) scaling_cmd(scal_a);
    else if (*scen) scenario_cmd(scen_a);
    else if (*ar) ar1_cmd(ar1_a);
  } catch (const ConfigError& e) {
    std::cerr << "ddscale: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ddscale: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
