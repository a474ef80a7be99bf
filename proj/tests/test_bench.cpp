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

#include <atomic>
#include <sstream>

#include "ddscale/bench.hpp"

using namespace dds;
using namespace dds::bench;

namespace {

PerfPlan small_plan() {
  PerfPlan p;
  p.difficulties = {1, 11};
  p.n = 40;
  p.features = 60;
  p.clusters = 4;
  p.t_max = 40;
  p.replicates = 2;
  p.seed = 5;
  p.checkpoints = {5, 20, 40};
  return p;
}

std::string perf_csv(const std::vector<PerfRow>& rows) {
  std::ostringstream out;
  write_perf_csv(out, rows);
  return out.str();
}

// seconds = 2e-7 N T^2 for MM, 3e-7 N T for RANDOM.
std::vector<ScalingRow> power_law_rows() {
  std::vector<ScalingRow> rows;
  for (Index n : {250, 500, 1000, 2000}) {
    for (Index t : {10, 25, 50}) {
      const double nd = static_cast<double>(n), td = static_cast<double>(t);
      rows.push_back({{Strategy::RMSE_LOSS, EmulatorKind::MM}, n, t, 2e-7 * nd * td * td});
      rows.push_back({{Strategy::RANDOM, EmulatorKind::MM}, n, t, 3e-7 * nd * td});
    }
  }
  return rows;
}

const Method kLoss{Strategy::RMSE_LOSS, EmulatorKind::MM};
const Method kRandom{Strategy::RANDOM, EmulatorKind::MM};

}  // namespace

TEST(ParallelFor, VisitsEachIndexOnce) {
  for (unsigned workers : {1u, 3u}) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(50, workers, [&](Index k) { ++hits[static_cast<std::size_t>(k)]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  EXPECT_THROW(parallel_for(10, 2, [](Index k) {
                 if (k == 7) throw InvalidInput("boom");
               }),
               InvalidInput);
}

TEST(Performance, DeterministicAcrossRunsAndWorkers) {
  PerfPlan p = small_plan();
  const std::string a = perf_csv(run_performance_grid(p));
  EXPECT_EQ(a, perf_csv(run_performance_grid(p)));
  p.workers = 3;
  EXPECT_EQ(a, perf_csv(run_performance_grid(p)));
}

TEST(Performance, ExhaustedBudgetHasZeroRmse) {
  const PerfPlan p = small_plan();
  const auto rows = run_performance_grid(p);
  EXPECT_EQ(rows.size(), 2u * 2u * 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.replicates, 2);
    if (r.t == p.n) EXPECT_EQ(r.mean_rmse, 0.0);
    else EXPECT_GT(r.mean_rmse, 0.0);
  }
  EXPECT_EQ(mean_rmse_at(rows, 11, kRandom, 40), 0.0);
  EXPECT_THROW(mean_rmse_at(rows, 6, kRandom, 40), InvalidInput);
  EXPECT_THROW(mean_rmse_at(rows, 1, kRandom, 7), InvalidInput);
}

TEST(Performance, CsvSchema) {
  const std::string csv = perf_csv(run_performance_grid(small_plan()));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "difficulty,strategy,emulator,t,mean_rmse,mean_delta_error,replicates");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6) << line;
}

TEST(Scaling, SlopesOfExactPowerLaws) {
  const auto rows = power_law_rows();
  EXPECT_NEAR(slope_vs_n(rows, kLoss, 25), 1.0, 1e-12);
  EXPECT_NEAR(slope_vs_t(rows, kLoss, 1000), 2.0, 1e-12);
  EXPECT_NEAR(slope_vs_t(rows, kRandom, 250), 1.0, 1e-12);
  EXPECT_NEAR(loglog_slope({1, 10, 100}, {3, 3, 3}), 0.0, 1e-15);
  EXPECT_THROW(loglog_slope({1}, {1}), InvalidInput);
  EXPECT_THROW(loglog_slope({1, 2}, {0, 1}), InvalidInput);
}

TEST(Scaling, CostModelRecoversExponents) {
  const CostModel c = fit_cost_model(power_law_rows(), kLoss);
  EXPECT_NEAR(c.b, 1.0, 1e-10);
  EXPECT_NEAR(c.c, 2.0, 1e-10);
  EXPECT_NEAR(c(700.0, 30.0), 2e-7 * 700 * 900, 1e-12);
  EXPECT_THROW(fit_cost_model(power_law_rows(), Method{Strategy::FURTHEST, EmulatorKind::NN}), InvalidInput);
}

TEST(Scaling, SmallGridTimesEveryCell) {
  ScalingPlan p;
  p.methods = {kRandom};
  p.n_values = {30, 60};
  p.t_values = {5, 10};
  p.repeats = 1;
  const auto rows = run_scaling_grid(p);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_GE(r.seconds, 0.0);
  std::ostringstream out;
  write_scaling_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "strategy,emulator,n,t_max,decision_seconds");
  const DenseMatrix x = scaling_matrix(30, 40, 1);
  EXPECT_TRUE(x == scaling_matrix(30, 40, 1));
  EXPECT_TRUE(x == x.transpose());
}

TEST(Scenario, ExpensiveElementsFollowRmseRanking) {
  std::vector<PerfRow> perf;
  for (Index t : {10, 25, 50}) {
    perf.push_back({1, kLoss, t, 1.0 / static_cast<double>(t), 0.0, 2});
    perf.push_back({1, kRandom, t, 2.0 / static_cast<double>(t), 0.0, 2});
  }
  const auto rows = scenario_curves({{"big", 1e3, 1}}, 500, perf, power_law_rows());
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t k = 0; k < rows.size(); k += 2) {
    EXPECT_EQ(rows[k].t, rows[k + 1].t);
    // Both methods pay the same evaluation cost to within the decision cost.
    EXPECT_NEAR(rows[k].total_seconds / rows[k + 1].total_seconds, 1.0, 1e-6);
    EXPECT_LT(rows[k].rmse, rows[k + 1].rmse);
  }
}

TEST(Scenario, FreeElementsLeaveDecisionCostOnly) {
  std::vector<PerfRow> perf{{11, kLoss, 25, 0.3, 0.0, 2}, {11, kRandom, 25, 0.4, 0.0, 2}};
  const auto rows = scenario_curves({{"free", 0.0, 11}}, 1000, perf, power_law_rows());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].total_seconds, 2e-7 * 1000 * 625, 1e-12);
  EXPECT_NEAR(rows[1].total_seconds, 3e-7 * 1000 * 25, 1e-12);
  EXPECT_THROW(scenario_curves({{"missing", 0.0, 6}}, 1000, perf, power_law_rows()), InvalidInput);
  std::ostringstream out;
  write_scenario_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "scenario,strategy,emulator,t,total_seconds,rmse");
}
