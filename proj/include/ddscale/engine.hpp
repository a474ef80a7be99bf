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

// The sequential choice loop: propose, emulate, decide, evaluate, assess,
// refit, repeat until the budget is spent.

#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddscale/choice.hpp"
#include "ddscale/oracle.hpp"

namespace dds {

struct Budget {
  std::optional<Index> t_max;
  /// Maximum cumulative evaluation cost.
  std::optional<double> cost;
};

struct RunConfig {
  Strategy strategy = Strategy::RMSE_LOSS;
  EmulatorKind emulator = EmulatorKind::MM;
  VarianceMode variance = VarianceMode::REDUCED;
  CvPolicy cv = CvPolicy::OBS;
  LossSpec loss;
  Budget budget;
  Index p_cap = 80;
  std::uint64_t seed = 0;
  bool local_search = false;
  Index k_top = 10;
  /// From this t on, `switch_strategy` replaces `strategy`.
  std::optional<Index> switch_t;
  Strategy switch_strategy = Strategy::FURTHEST;
  std::vector<int> labels;
  Index exclude_first = 5;
  SolverOptions solver;
};

inline void validate(const RunConfig& c, Index n) {
  if (c.budget.t_max.has_value() == c.budget.cost.has_value())
    throw ConfigError("exactly one of budget.t_max and budget.cost must be set");
  if (c.budget.t_max && (*c.budget.t_max < 0 || *c.budget.t_max > n))
    throw ConfigError("budget.t_max must lie in [0, N] (N = " + std::to_string(n) + ")");
  if (c.budget.cost && !(*c.budget.cost >= 0.0)) throw ConfigError("budget.cost must be non-negative");
  if (c.p_cap < 1) throw ConfigError("choice.p_cap must be at least 1");
  if (c.k_top < 1) throw ConfigError("choice.k_top must be at least 1");
  if (!(c.loss.element_cost > 0.0)) throw ConfigError("oracle.element_cost must be positive");
  if (!(c.loss.cost_coefficient >= 0.0)) throw ConfigError("loss.cost_coefficient must be non-negative");
  const bool wants_labels = c.strategy == Strategy::PRIOR_LABEL ||
                            (c.switch_t && c.switch_strategy == Strategy::PRIOR_LABEL);
  if (wants_labels && static_cast<Index>(c.labels.size()) != n)
    throw ConfigError("prior_label strategy needs one label per object");
}

struct RunRecord {
  Index iteration = 0;
  /// Evaluated rows after this step.
  Index t = 0;
  ActionKind action = ActionKind::Stop;
  ObjectId i = -1;
  ObjectId j = -1;
  bool has_prediction = false;
  std::optional<double> rmse;
  std::optional<double> delta_pred;
  std::optional<double> delta_obs;
  std::optional<double> delta_error;
  double cumulative_cost = 0.0;
  /// Choosing the action plus emulator and variance-model upkeep.
  double decision_seconds = 0.0;
  /// Oracle time.
  double evaluation_seconds = 0.0;
  /// Predicting the chosen row before evaluation and scoring it afterwards.
  double assessment_seconds = 0.0;
  bool gamma_fallback = true;
  /// Whole-matrix RMSE on unevaluated rows; benchmark mode only.
  std::optional<double> true_rmse;
};

struct Completion {
  DenseMatrix matrix;
  /// Predicted row error, zero for evaluated rows.
  Vector delta;
};

/// Best estimate of the full matrix: observed rows verbatim, emulated rows
/// elsewhere, individually evaluated elements on top.
inline Completion complete_matrix(const PartialState& s, Emulator& em, const GammaCoefficients& gamma) {
  if (s.t() == 0) throw EmptyState("complete_matrix: no evaluated objects");
  em.sync(s);
  const Index n = s.size();
  Completion c{DenseMatrix(n, n), Vector::Zero(n)};
  for (ObjectId i = 0; i < n; ++i) {
    if (s.is_evaluated(i)) {
      auto r = s.row_of(i);
      c.matrix.row(i) = Eigen::Map<const Eigen::RowVectorXd>(r.data(), n);
      continue;
    }
    AlphaFit fit = em.fit(s, i);
    c.matrix.row(i) = predict_row(s, fit).transpose();
    c.delta[i] = predict_delta(cached_features(s, em, fit, i), gamma);
  }
  for (const auto& [key, v] : s.local_elements()) c.matrix(key.first, key.second) = v;
  return c;
}

/// RMS error over rows not evaluated, diagonal excluded.
inline double true_rmse(const DenseMatrix& completed, const DenseMatrix& truth, std::span<const char> evaluated) {
  if (completed.rows() != truth.rows() || completed.cols() != truth.cols() ||
      static_cast<Index>(evaluated.size()) != truth.rows())
    throw InvalidInput("true_rmse: shape mismatch");
  double sse = 0.0;
  double count = 0.0;
  for (Index i = 0; i < truth.rows(); ++i) {
    if (evaluated[static_cast<std::size_t>(i)]) continue;
    for (Index j = 0; j < truth.cols(); ++j) {
      if (i == j) continue;
      const double d = completed(i, j) - truth(i, j);
      sse += d * d;
      count += 1.0;
    }
  }
  return count > 0.0 ? std::sqrt(sse / count) : 0.0;
}

inline std::vector<char> evaluated_mask(const PartialState& s) {
  std::vector<char> m(static_cast<std::size_t>(s.size()), 0);
  for (ObjectId i : s.evaluated()) m[static_cast<std::size_t>(i)] = 1;
  return m;
}

/// Optional whole-matrix assessment against a known truth.
struct BenchmarkMode {
  const DenseMatrix* truth = nullptr;
  /// t values after which true_rmse is computed; empty means every step.
  std::vector<Index> checkpoints;
};

class Engine {
 public:
  Engine(Oracle& oracle, RunConfig cfg)
      : oracle_(oracle),
        cfg_(std::move(cfg)),
        state_(oracle.size()),
        emulator_(cfg_.emulator, oracle.size(), cfg_.solver),
        gamma_(GammaCoefficients::pessimistic(cfg_.variance)),
        gamma_acc_(cfg_.variance),
        rng_(derive_rng(cfg_.seed)) {
    validate(cfg_, oracle.size());
    cfg_.loss.element_cost = oracle.element_cost();
    history_.policy = cfg_.cv;
    history_.exclude_first = cfg_.exclude_first;
  }

  void set_benchmark(BenchmarkMode b) { bench_ = std::move(b); }

  const PartialState& state() const { return state_; }
  const CvHistory& history() const { return history_; }
  const GammaCoefficients& gamma() const { return gamma_; }
  const RunConfig& config() const { return cfg_; }
  Emulator& emulator() { return emulator_; }
  Index iteration() const { return iteration_; }

  /// Generator state as text (std::mt19937_64 stream format).
  std::string rng_state() const {
    std::ostringstream ss;
    ss << rng_;
    return ss.str();
  }

  /// Resumes from a checkpoint: observed rows, elements, cv history and the
  /// generator state.
  void restore(PartialState s, CvHistory h, Index iteration, const std::string& rng_state) {
    if (s.size() != state_.size()) throw InvalidInput("restore: object count mismatch");
    std::istringstream ss(rng_state);
    ss >> rng_;
    if (!ss) throw InvalidInput("restore: malformed generator state");
    state_ = std::move(s);
    history_ = std::move(h);
    history_.policy = cfg_.cv;
    history_.exclude_first = cfg_.exclude_first;
    gamma_acc_ = GammaAccumulator::from(history_, cfg_.variance);
    iteration_ = iteration;
    emulator_ = Emulator(cfg_.emulator, state_.size(), cfg_.solver);
    emulator_.sync(state_);
    refit_gamma();
  }

  bool finished() const {
    if (stopped_) return true;
    if (state_.t() >= state_.size()) return true;
    if (cfg_.budget.t_max) return state_.t() >= *cfg_.budget.t_max;
    const double cheapest = cfg_.local_search ? cfg_.loss.element_cost
                                              : cfg_.loss.element_cost * static_cast<double>(state_.size());
    return state_.spent_cost() + cheapest > *cfg_.budget.cost;
  }

  Strategy active_strategy() const {
    return (cfg_.switch_t && state_.t() >= *cfg_.switch_t) ? cfg_.switch_strategy : cfg_.strategy;
  }

  /// One pass of propose / decide / evaluate / assess / refit.
  RunRecord step() {
    using clock = std::chrono::steady_clock;
    if (finished()) throw InvalidInput("step: budget exhausted");
    const auto start = clock::now();
    double excluded = 0.0;

    RunRecord rec;
    rec.iteration = ++iteration_;
    Rng& rng = rng_;
    const Index n = state_.size();
    const double row_cost = cfg_.loss.element_cost * static_cast<double>(n);

    Action action = choose(rng, row_cost);
    if (action.kind != ActionKind::Stop && cfg_.budget.cost && state_.spent_cost() + action.cost > *cfg_.budget.cost)
      action = Action::stop();

    rec.action = action.kind;
    rec.i = action.i;
    rec.j = action.j;
    if (action.kind == ActionKind::Stop) {
      stopped_ = true;
    } else if (action.kind == ActionKind::GlobalRow) {
      const ObjectId i = action.i;
      const Index t_before = state_.t();
      std::optional<Vector> pred;
      VarianceFeatures feats;
      const auto a0 = clock::now();
      if (t_before > 0) {
        AlphaFit fit = emulator_.fit(state_, i);
        pred = predict_row(state_, fit);
        feats = cached_features(state_, emulator_, fit, i);
        rec.delta_pred = predict_delta(feats, gamma_);
      }
      rec.assessment_seconds = std::chrono::duration<double>(clock::now() - a0).count();
      const auto q0 = clock::now();
      std::vector<double> row = oracle_.row(i);
      rec.evaluation_seconds = std::chrono::duration<double>(clock::now() - q0).count();
      excluded += rec.evaluation_seconds;
      if (static_cast<Index>(row.size()) != n)
        throw OracleError("oracle returned " + std::to_string(row.size()) + " values for row " + std::to_string(i) +
                          ", expected " + std::to_string(n));
      if (!all_finite(row)) throw OracleError("oracle returned non-finite values for row " + std::to_string(i));

      const auto a1 = clock::now();
      if (pred) {
        rec.has_prediction = true;
        const std::span<const double> ps(pred->data(), static_cast<std::size_t>(n));
        rec.rmse = row_rmse(ps, row, i);
        rec.delta_obs = rec.rmse;
        rec.delta_error = (*rec.delta_pred - *rec.delta_obs) * (*rec.delta_pred - *rec.delta_obs);
        cv_update(history_, t_before, i, feats, ps, row);
        if (history_.records.back().t > history_.exclude_first) gamma_acc_.add(history_.records.back());
      }
      rec.assessment_seconds += std::chrono::duration<double>(clock::now() - a1).count();
      state_.insert_row(i, row);
      state_.add_cost(row_cost);
      emulator_.sync(state_);
    } else {
      const auto q0 = clock::now();
      const double v = oracle_.element(action.i, action.j);
      rec.evaluation_seconds = std::chrono::duration<double>(clock::now() - q0).count();
      excluded += rec.evaluation_seconds;
      if (!std::isfinite(v)) throw OracleError("oracle returned a non-finite element");
      state_.add_local(action.i, action.j, v);
      state_.add_cost(cfg_.loss.element_cost);
    }
    refit_gamma();
    rec.gamma_fallback = gamma_.fallback;
    rec.t = state_.t();
    rec.cumulative_cost = state_.spent_cost();
    rec.decision_seconds =
        std::chrono::duration<double>(clock::now() - start).count() - excluded - rec.assessment_seconds;

    if (bench_.truth && action.kind != ActionKind::Stop && state_.t() > 0 && wants_checkpoint(state_.t()) &&
        action.kind == ActionKind::GlobalRow) {
      Completion c = complete_matrix(state_, emulator_, gamma_);
      auto mask = evaluated_mask(state_);
      rec.true_rmse = true_rmse(c.matrix, *bench_.truth, mask);
    }
    return rec;
  }

  /// Steps until the budget is spent or Stop is chosen. Each record is
  /// handed to `sink` as soon as it exists, so an oracle failure leaves
  /// every completed step already delivered.
  template <class Sink>
  void run(Sink&& sink) {
    while (!finished()) sink(step());
  }

  std::vector<RunRecord> run() {
    std::vector<RunRecord> out;
    run([&](const RunRecord& r) { out.push_back(r); });
    return out;
  }

  Completion complete() { return complete_matrix(state_, emulator_, gamma_); }

 private:
  bool wants_checkpoint(Index t) const {
    if (bench_.checkpoints.empty()) return true;
    return std::find(bench_.checkpoints.begin(), bench_.checkpoints.end(), t) != bench_.checkpoints.end();
  }

  Action choose(Rng& rng, double row_cost) {
    const Strategy strat = active_strategy();
    if (state_.t() == 0) {
      if (strat == Strategy::PRIOR_LABEL) return propose_prior_label(state_, cfg_.labels, rng, row_cost);
      return propose_random(state_, rng, row_cost);
    }
    ChoiceContext ctx{state_, emulator_, gamma_, cfg_.loss};
    Action a;
    switch (strat) {
      case Strategy::RMSE_LOSS: a = propose_rmse_loss(ctx, rng, cfg_.p_cap); break;
      case Strategy::FURTHEST: a = propose_furthest(state_, emulator_, row_cost); break;
      case Strategy::RANDOM: a = propose_random(state_, rng, row_cost); break;
      case Strategy::PRIOR_LABEL: a = propose_prior_label(state_, cfg_.labels, rng, row_cost); break;
    }
    if (!cfg_.local_search) return a;

    std::vector<Action> actions;
    if (!a.est_loss_reduction) a.est_loss_reduction = estimate_global_reduction(ctx, a.i, rng, cfg_.p_cap);
    actions.push_back(a);
    for (auto& l : propose_local(ctx, cfg_.k_top)) actions.push_back(l);
    return decide(actions, cfg_.loss, cfg_.loss.cost_coefficient > 0.0);
  }

  void refit_gamma() {
    if (cfg_.cv == CvPolicy::OBS) {
      gamma_ = gamma_acc_.fit(cfg_.solver);
      return;
    }
    CvHistory loo;
    loo.exclude_first = 0;
    loo.records = loo_records(state_, cfg_.emulator, cfg_.solver);
    gamma_ = fit_gamma(loo, cfg_.variance, cfg_.solver);
  }

  Oracle& oracle_;
  RunConfig cfg_;
  PartialState state_;
  Emulator emulator_;
  CvHistory history_;
  GammaCoefficients gamma_;
  GammaAccumulator gamma_acc_;
  Rng rng_;
  BenchmarkMode bench_;
  Index iteration_ = 0;
  bool stopped_ = false;
};

}  // namespace dds
