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

#pragma once

// Benchmark harness: performance curves against a known truth, decision-time
// scaling with a negligible oracle, and modeled total-cost scenarios.

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ddscale/engine.hpp"
#include "ddscale/simgen.hpp"

namespace dds::bench {

struct Method {
  Strategy strategy = Strategy::RMSE_LOSS;
  EmulatorKind emulator = EmulatorKind::MM;
};

inline std::string label(const Method& m) { return std::string(to_string(m.strategy)) + "+" + to_string(m.emulator); }

inline Strategy parse_strategy(const std::string& s) {
  for (Strategy v : {Strategy::RMSE_LOSS, Strategy::FURTHEST, Strategy::RANDOM, Strategy::PRIOR_LABEL})
    if (s == to_string(v)) return v;
  throw InvalidInput("unknown strategy '" + s + "'");
}

inline EmulatorKind parse_emulator(const std::string& s) {
  for (EmulatorKind v : {EmulatorKind::NN, EmulatorKind::MM})
    if (s == to_string(v)) return v;
  throw InvalidInput("unknown emulator '" + s + "'");
}

/// "strategy+emulator", e.g. rmse_loss+mm.
inline Method parse_method(const std::string& s) {
  const auto plus = s.find('+');
  if (plus == std::string::npos) throw InvalidInput("method '" + s + "' must look like strategy+emulator");
  return {parse_strategy(s.substr(0, plus)), parse_emulator(s.substr(plus + 1))};
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line) || line != header) throw InvalidInput("CSV header mismatch, expected: " + header);
  const auto width = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',') + 1);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() != width) throw InvalidInput("CSV row has " + std::to_string(cells.size()) + " cells: " + line);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double to_double(const std::string& s) {
  if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InvalidInput("bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// Runs `count` jobs on up to `workers` threads. Results are written by
/// index, so output never depends on the worker count.
template <class Fn>
void parallel_for(Index count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || count <= 1) {
    for (Index k = 0; k < count; ++k) fn(k);
    return;
  }
  std::mutex mu;
  Index next = 0;
  std::exception_ptr err;
  auto body = [&] {
    for (;;) {
      Index k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= count || err) return;
        k = next++;
      }
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::min<Index>(workers, count); ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------- performance

struct PerfPlan {
  std::vector<int> difficulties{1, 6, 11};
  std::vector<Method> methods{{Strategy::RMSE_LOSS, EmulatorKind::MM}, {Strategy::RANDOM, EmulatorKind::MM}};
  Index n = 500;
  Index features = 1000;
  Index clusters = 10;
  Index t_max = 50;
  Index replicates = 20;
  std::uint64_t seed = 0;
  /// t values reported; empty means every t in 1..t_max.
  std::vector<Index> checkpoints;
  unsigned workers = 1;
};

/// One replicate's trace at the requested checkpoints.
struct PerfTrace {
  int difficulty = 0;
  Method method;
  Index replicate = 0;
  std::map<Index, double> true_rmse;
  std::map<Index, double> delta_error;
  /// (delta_pred, delta_obs) for every step with a fitted variance model.
  std::vector<std::tuple<Index, double, double>> calibration;
};

struct PerfRow {
  int difficulty = 0;
  Method method;
  Index t = 0;
  double mean_rmse = 0.0;
  double mean_delta_error = std::numeric_limits<double>::quiet_NaN();
  Index replicates = 0;
};

inline std::uint64_t dataset_seed(std::uint64_t seed, int difficulty, Index replicate) {
  Rng r = derive_rng(seed, 11u, static_cast<std::uint64_t>(difficulty), static_cast<std::uint64_t>(replicate));
  return r();
}

inline std::uint64_t run_seed(std::uint64_t seed, int difficulty, Index replicate) {
  Rng r = derive_rng(seed, 12u, static_cast<std::uint64_t>(difficulty), static_cast<std::uint64_t>(replicate));
  return r();
}

inline std::vector<PerfTrace> run_performance_traces(const PerfPlan& plan) {
  if (plan.replicates < 1) throw InvalidInput("performance grid: need at least one replicate");
  std::vector<Index> checkpoints = plan.checkpoints;
  if (checkpoints.empty())
    for (Index t = 1; t <= plan.t_max; ++t) checkpoints.push_back(t);

  const Index jobs = static_cast<Index>(plan.difficulties.size()) * plan.replicates;
  std::vector<std::vector<PerfTrace>> per_job(static_cast<std::size_t>(jobs));
  parallel_for(jobs, plan.workers, [&](Index job) {
    const int d = plan.difficulties[static_cast<std::size_t>(job / plan.replicates)];
    const Index rep = job % plan.replicates;
    auto ds = sim::simulate(sim::SimSpec::from_difficulty(d, dataset_seed(plan.seed, d, rep), plan.n, plan.features,
                                                          plan.clusters));
    for (const Method& m : plan.methods) {
      MatrixOracle oracle(ds.distances);
      RunConfig cfg;
      cfg.strategy = m.strategy;
      cfg.emulator = m.emulator;
      cfg.budget.t_max = plan.t_max;
      cfg.seed = run_seed(plan.seed, d, rep);
      Engine engine(oracle, cfg);
      engine.set_benchmark({&ds.distances, checkpoints});
      PerfTrace tr;
      tr.difficulty = d;
      tr.method = m;
      tr.replicate = rep;
      engine.run([&](const RunRecord& r) {
        if (r.true_rmse) tr.true_rmse[r.t] = *r.true_rmse;
        if (r.delta_error && std::find(checkpoints.begin(), checkpoints.end(), r.t) != checkpoints.end())
          tr.delta_error[r.t] = *r.delta_error;
        if (r.delta_pred && r.delta_obs && !r.gamma_fallback) tr.calibration.emplace_back(r.t, *r.delta_pred, *r.delta_obs);
      });
      per_job[static_cast<std::size_t>(job)].push_back(std::move(tr));
    }
  });
  std::vector<PerfTrace> out;
  for (auto& v : per_job)
    for (auto& tr : v) out.push_back(std::move(tr));
  return out;
}

/// Replicate means per (difficulty, method, t).
inline std::vector<PerfRow> summarize(const PerfPlan& plan, const std::vector<PerfTrace>& traces) {
  std::vector<PerfRow> rows;
  for (int d : plan.difficulties) {
    for (const Method& m : plan.methods) {
      std::map<Index, std::pair<double, Index>> rmse;
      std::map<Index, std::pair<double, Index>> derr;
      for (const auto& tr : traces) {
        if (tr.difficulty != d || tr.method.strategy != m.strategy || tr.method.emulator != m.emulator) continue;
        for (const auto& [t, v] : tr.true_rmse) {
          rmse[t].first += v;
          ++rmse[t].second;
        }
        for (const auto& [t, v] : tr.delta_error) {
          derr[t].first += v;
          ++derr[t].second;
        }
      }
      for (const auto& [t, acc] : rmse) {
        PerfRow r;
        r.difficulty = d;
        r.method = m;
        r.t = t;
        r.mean_rmse = acc.first / static_cast<double>(acc.second);
        r.replicates = acc.second;
        if (auto it = derr.find(t); it != derr.end()) r.mean_delta_error = it->second.first / static_cast<double>(it->second.second);
        rows.push_back(r);
      }
    }
  }
  return rows;
}

inline std::vector<PerfRow> run_performance_grid(const PerfPlan& plan) {
  return summarize(plan, run_performance_traces(plan));
}

inline double mean_rmse_at(const std::vector<PerfRow>& rows, int d, const Method& m, Index t) {
  for (const auto& r : rows)
    if (r.difficulty == d && r.method.strategy == m.strategy && r.method.emulator == m.emulator && r.t == t)
      return r.mean_rmse;
  throw InvalidInput("no performance cell for d=" + std::to_string(d) + ", " + label(m) + ", t=" + std::to_string(t));
}

inline void write_perf_csv(std::ostream& out, const std::vector<PerfRow>& rows) {
  out << "difficulty,strategy,emulator,t,mean_rmse,mean_delta_error,replicates\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.difficulty << ',' << to_string(r.method.strategy) << ',' << to_string(r.method.emulator) << ',' << r.t << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.mean_rmse);
    out << buf << ',';
    if (std::isnan(r.mean_delta_error)) {
      out << "NA";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", r.mean_delta_error);
      out << buf;
    }
    out << ',' << r.replicates << "\n";
  }
}

inline std::vector<PerfRow> read_perf_csv(std::istream& in) {
  std::vector<PerfRow> out;
  for (const auto& c : detail::read_csv(in, "difficulty,strategy,emulator,t,mean_rmse,mean_delta_error,replicates")) {
    PerfRow r;
    r.difficulty = std::stoi(c[0]);
    r.method = {parse_strategy(c[1]), parse_emulator(c[2])};
    r.t = std::stoll(c[3]);
    r.mean_rmse = detail::to_double(c[4]);
    r.mean_delta_error = detail::to_double(c[5]);
    r.replicates = std::stoll(c[6]);
    out.push_back(r);
  }
  return out;
}

// -------------------------------------------------------------------- scaling

struct ScalingPlan {
  std::vector<Method> methods{{Strategy::RANDOM, EmulatorKind::MM},
                              {Strategy::FURTHEST, EmulatorKind::MM},
                              {Strategy::RMSE_LOSS, EmulatorKind::MM},
                              {Strategy::RMSE_LOSS, EmulatorKind::NN}};
  std::vector<Index> n_values{250, 500, 1000, 2000};
  std::vector<Index> t_values{10, 25, 50};
  Index p_cap = 80;
  /// Timing repeats per cell; the minimum is reported.
  Index repeats = 3;
  Index features = 40;
  std::uint64_t seed = 0;
};

struct ScalingRow {
  Method method;
  Index n = 0;
  Index t_max = 0;
  double seconds = 0.0;
};

/// Cheap clustered test matrix: 10 Gaussian cluster centres plus noise.
inline DenseMatrix scaling_matrix(Index n, Index features, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 21u, static_cast<std::uint64_t>(n));
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix centres(10, features);
  for (Index k = 0; k < centres.size(); ++k) centres.data()[k] = normal(rng);
  DenseMatrix f(n, features);
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < features; ++l) f(i, l) = centres(i % 10, l) + 0.5 * normal(rng);
  return sim::distance_matrix(f);
}

/// Decision time (oracle excluded) summed over one run to t_max.
inline double time_run(const DenseMatrix& x, const Method& m, Index t_max, Index p_cap, std::uint64_t seed) {
  MatrixOracle oracle(x);
  RunConfig cfg;
  cfg.strategy = m.strategy;
  cfg.emulator = m.emulator;
  cfg.budget.t_max = t_max;
  cfg.p_cap = p_cap;
  cfg.seed = seed;
  Engine engine(oracle, cfg);
  double total = 0.0;
  engine.run([&](const RunRecord& r) { total += r.decision_seconds; });
  return total;
}

/// Every (method, N, T_max) cell, timed on the calling thread only.
inline std::vector<ScalingRow> run_scaling_grid(const ScalingPlan& plan) {
  std::vector<ScalingRow> rows;
  for (Index n : plan.n_values) {
    const DenseMatrix x = scaling_matrix(n, plan.features, plan.seed);
    for (const Method& m : plan.methods) {
      for (Index t : plan.t_values) {
        double best = std::numeric_limits<double>::infinity();
        for (Index r = 0; r < plan.repeats; ++r) best = std::min(best, time_run(x, m, t, plan.p_cap, plan.seed + static_cast<std::uint64_t>(r)));
        rows.push_back({m, n, t, best});
      }
    }
  }
  return rows;
}

/// Least-squares slope of log y on log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("loglog_slope: need at least two matching points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw InvalidInput("loglog_slope: values must be positive");
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
    sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
  }
  return sxy / sxx;
}

/// Slope in N at fixed T_max.
inline double slope_vs_n(const std::vector<ScalingRow>& rows, const Method& m, Index t_max) {
  std::vector<double> x, y;
  for (const auto& r : rows)
    if (r.method.strategy == m.strategy && r.method.emulator == m.emulator && r.t_max == t_max) {
      x.push_back(static_cast<double>(r.n));
      y.push_back(r.seconds);
    }
  return loglog_slope(x, y);
}

/// Slope in T_max at fixed N.
inline double slope_vs_t(const std::vector<ScalingRow>& rows, const Method& m, Index n) {
  std::vector<double> x, y;
  for (const auto& r : rows)
    if (r.method.strategy == m.strategy && r.method.emulator == m.emulator && r.n == n) {
      x.push_back(static_cast<double>(r.t_max));
      y.push_back(r.seconds);
    }
  return loglog_slope(x, y);
}

inline void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "strategy,emulator,n,t_max,decision_seconds\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g", r.seconds);
    out << to_string(r.method.strategy) << ',' << to_string(r.method.emulator) << ',' << r.n << ',' << r.t_max << ','
        << buf << "\n";
  }
}

inline std::vector<ScalingRow> read_scaling_csv(std::istream& in) {
  std::vector<ScalingRow> out;
  for (const auto& c : detail::read_csv(in, "strategy,emulator,n,t_max,decision_seconds"))
    out.push_back({{parse_strategy(c[0]), parse_emulator(c[1])}, std::stoll(c[2]), std::stoll(c[3]), detail::to_double(c[4])});
  return out;
}

// ------------------------------------------------------------------ scenarios

/// C(N, T) = exp(a) N^b T^c fitted by least squares in log space.
struct CostModel {
  double log_a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double operator()(double n, double t) const { return std::exp(log_a + b * std::log(n) + c * std::log(t)); }
};

inline CostModel fit_cost_model(const std::vector<ScalingRow>& rows, const Method& m) {
  std::vector<const ScalingRow*> sel;
  for (const auto& r : rows)
    if (r.method.strategy == m.strategy && r.method.emulator == m.emulator && r.seconds > 0.0) sel.push_back(&r);
  if (sel.size() < 3) throw InvalidInput("scenario: too few scaling cells for " + label(m));
  Eigen::MatrixXd a(static_cast<Index>(sel.size()), 3);
  Vector y(static_cast<Index>(sel.size()));
  for (Index k = 0; k < a.rows(); ++k) {
    const auto* r = sel[static_cast<std::size_t>(k)];
    a(k, 0) = 1.0;
    a(k, 1) = std::log(static_cast<double>(r->n));
    a(k, 2) = std::log(static_cast<double>(r->t_max));
    y[k] = std::log(r->seconds);
  }
  Vector x = a.completeOrthogonalDecomposition().solve(y);
  return {x[0], x[1], x[2]};
}

struct Scenario {
  std::string name;
  /// Seconds per element evaluation.
  double element_seconds = 0.0;
  int difficulty = 1;
};

struct ScenarioRow {
  std::string scenario;
  Method method;
  Index t = 0;
  double total_seconds = 0.0;
  double rmse = 0.0;
};

/// total(t) = C(N, t) + L t N for every method and t in the performance table.
inline std::vector<ScenarioRow> scenario_curves(const std::vector<Scenario>& scenarios, Index n,
                                                const std::vector<PerfRow>& perf,
                                                const std::vector<ScalingRow>& scaling) {
  std::vector<ScenarioRow> out;
  for (const auto& sc : scenarios) {
    bool any = false;
    std::map<std::pair<Strategy, EmulatorKind>, CostModel> models;
    for (const auto& r : perf) {
      if (r.difficulty != sc.difficulty) continue;
      any = true;
      const auto key = std::pair(r.method.strategy, r.method.emulator);
      if (!models.count(key)) models[key] = fit_cost_model(scaling, r.method);
      const double c = models[key](static_cast<double>(n), static_cast<double>(r.t));
      out.push_back({sc.name, r.method, r.t,
                     c + sc.element_seconds * static_cast<double>(r.t) * static_cast<double>(n), r.mean_rmse});
    }
    if (!any) throw InvalidInput("scenario " + sc.name + ": no performance cells at difficulty " + std::to_string(sc.difficulty));
  }
  return out;
}

inline std::vector<Scenario> default_scenarios() {
  return {{"s1", 0.1, 1}, {"s2", 0.1, 11}, {"s3", 0.001, 1}, {"s4", 0.001, 11}};
}

inline void write_scenario_csv(std::ostream& out, const std::vector<ScenarioRow>& rows) {
  out << "scenario,strategy,emulator,t,total_seconds,rmse\n";
  char a[32], b[32];
  for (const auto& r : rows) {
    std::snprintf(a, sizeof a, "%.6g", r.total_seconds);
    std::snprintf(b, sizeof b, "%.17g", r.rmse);
    out << r.scenario << ',' << to_string(r.method.strategy) << ',' << to_string(r.method.emulator) << ',' << r.t << ','
        << a << ',' << b << "\n";
  }
}

}  // namespace dds::bench
