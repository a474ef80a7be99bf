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

// Emulator variance: delta_i, the expected RMS error of a predicted row,
// regressed with non-negative coefficients on cheap summaries of how object
// i sits relative to the evaluated set.

#include <algorithm>
#include <array>
#include <map>
#include <vector>

#include "ddscale/emulator.hpp"
#include "ddscale/solver.hpp"

namespace dds {

enum class VarianceMode { FULL, REDUCED };
enum class CvPolicy { OBS, LOO };

inline const char* to_string(VarianceMode m) { return m == VarianceMode::FULL ? "full" : "reduced"; }
inline const char* to_string(CvPolicy p) { return p == CvPolicy::OBS ? "obs" : "loo"; }

struct VarianceFeatures {
  double t = 0.0;
  double epsilon = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double r_inf = 0.0;
  bool evaluated = false;

  static constexpr std::size_t kFull = 7;

  /// intercept, t, 1/t, epsilon, r1, r2, r_inf
  std::array<double, kFull> full() const { return {1.0, t, t > 0 ? 1.0 / t : 0.0, epsilon, r1, r2, r_inf}; }
};

/// Indices into VarianceFeatures::full() used by each mode.
inline std::span<const std::size_t> active_features(VarianceMode mode) {
  static constexpr std::size_t kAll[] = {0, 1, 2, 3, 4, 5, 6};
  static constexpr std::size_t kReduced[] = {3, 6};
  if (mode == VarianceMode::FULL) return kAll;
  return kReduced;
}

struct GammaCoefficients {
  VarianceMode mode = VarianceMode::REDUCED;
  /// gamma_0, gamma_t, gamma_{1/t}, gamma_eps, gamma_1, gamma_2, gamma_inf
  std::array<double, VarianceFeatures::kFull> coef{};
  /// True when the history was too short and delta = r_inf is in force.
  bool fallback = false;

  static GammaCoefficients pessimistic(VarianceMode mode) {
    GammaCoefficients g;
    g.mode = mode;
    g.coef[6] = 1.0;
    g.fallback = true;
    return g;
  }
};

struct CvRecord {
  Index t = 0;  // evaluated objects when the prediction was made
  ObjectId object = -1;
  VarianceFeatures features;
  double delta_obs = 0.0;
};

struct CvHistory {
  std::vector<CvRecord> records;
  CvPolicy policy = CvPolicy::OBS;
  /// Records made at t <= exclude_first are kept but not fitted.
  Index exclude_first = 5;

  std::vector<const CvRecord*> usable() const {
    std::vector<const CvRecord*> out;
    for (const auto& r : records) {
      if (r.t > exclude_first) out.push_back(&r);
    }
    return out;
  }
};

/// Direct O(t) computation from the state. r_n are L_n norms of the
/// distances from the evaluated objects to i; r_inf is the nearest of them.
inline VarianceFeatures compute_features(const PartialState& s, const AlphaFit& fit, ObjectId i) {
  if (s.t() == 0) throw EmptyState("compute_features: no evaluated objects");
  VarianceFeatures f;
  f.evaluated = s.is_evaluated(i) && !fit.cross_validation;
  f.epsilon = fit.epsilon;
  f.r_inf = std::numeric_limits<double>::infinity();
  Index count = 0;
  double sq = 0.0;
  for (Index p = 0; p < s.t(); ++p) {
    if (fit.cross_validation && s.evaluated()[p] == i) continue;
    const double x = s.at(p, i);
    f.r1 += x;
    sq += x * x;
    f.r_inf = std::min(f.r_inf, x);
    ++count;
  }
  f.r2 = std::sqrt(sq);
  f.t = static_cast<double>(count);
  if (count == 0) f.r_inf = 0.0;
  return f;
}

/// Same quantities from the emulator's running sums, O(1).
inline VarianceFeatures cached_features(const PartialState& s, const Emulator& em, const AlphaFit& fit, ObjectId i) {
  VarianceFeatures f;
  f.evaluated = s.is_evaluated(i);
  f.epsilon = fit.epsilon;
  f.t = static_cast<double>(s.t());
  f.r1 = em.r1(i);
  f.r2 = em.r2(i);
  f.r_inf = em.r_inf(i);
  return f;
}

inline double predict_delta(const VarianceFeatures& f, const GammaCoefficients& g) {
  if (f.evaluated) return 0.0;
  const auto x = f.full();
  double d = 0.0;
  for (std::size_t k : active_features(g.mode)) d += g.coef[k] * x[k];
  return std::max(d, 0.0);
}

/// Normal equations of the gamma regression, accumulated one record at a
/// time so a refit costs O(k^3) regardless of history length.
class GammaAccumulator {
 public:
  explicit GammaAccumulator(VarianceMode mode = VarianceMode::REDUCED)
      : mode_(mode), cols_(active_features(mode)) {
    const auto k = static_cast<Index>(cols_.size());
    gram_ = Eigen::MatrixXd::Zero(k, k);
    rhs_ = Vector::Zero(k);
  }

  static GammaAccumulator from(const CvHistory& history, VarianceMode mode) {
    GammaAccumulator acc(mode);
    for (const CvRecord* r : history.usable()) acc.add(*r);
    return acc;
  }

  void add(const CvRecord& r) {
    const auto x = r.features.full();
    const auto k = static_cast<Index>(cols_.size());
    for (Index a = 0; a < k; ++a) {
      const double xa = x[cols_[static_cast<std::size_t>(a)]];
      rhs_[a] += xa * r.delta_obs;
      for (Index b = 0; b < k; ++b) gram_(a, b) += xa * x[cols_[static_cast<std::size_t>(b)]];
    }
    ++count_;
  }

  Index count() const { return count_; }

  /// Pessimistic gamma until two records exist or if the sums are not finite.
  GammaCoefficients fit(const SolverOptions& opts = {}) const {
    if (count_ < 2 || !gram_.allFinite() || !rhs_.allFinite()) return GammaCoefficients::pessimistic(mode_);
    GammaCoefficients g;
    g.mode = mode_;
    Vector coef = nnls_gram(gram_, rhs_, opts);
    for (std::size_t c = 0; c < cols_.size(); ++c) g.coef[cols_[c]] = coef[static_cast<Index>(c)];
    return g;
  }

 private:
  VarianceMode mode_;
  std::span<const std::size_t> cols_;
  Eigen::MatrixXd gram_;
  Vector rhs_;
  Index count_ = 0;
};

/// NNLS of realized errors on the mode's features over the usable records.
inline GammaCoefficients fit_gamma(const CvHistory& history, VarianceMode mode, const SolverOptions& opts = {}) {
  return GammaAccumulator::from(history, mode).fit(opts);
}

/// RMS of predicted minus observed over the row, self entry excluded.
inline double row_rmse(std::span<const double> predicted, std::span<const double> observed, ObjectId self) {
  if (predicted.size() != observed.size()) throw InvalidInput("row_rmse: length mismatch");
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    if (static_cast<ObjectId>(j) == self) continue;
    double d = predicted[j] - observed[j];
    sse += d * d;
    ++count;
  }
  return count ? std::sqrt(sse / static_cast<double>(count)) : 0.0;
}

/// Appends the realized error of a pre-evaluation prediction.
inline void cv_update(CvHistory& history, Index t_at_prediction, ObjectId just_evaluated,
                      const VarianceFeatures& features_at_prediction, std::span<const double> predicted_row,
                      std::span<const double> observed_row) {
  CvRecord r;
  r.t = t_at_prediction;
  r.object = just_evaluated;
  r.features = features_at_prediction;
  r.features.evaluated = false;
  r.delta_obs = row_rmse(predicted_row, observed_row, just_evaluated);
  history.records.push_back(r);
}

/// Leave-one-out records over the currently evaluated objects: each is
/// treated as if it were the last one evaluated.
inline std::vector<CvRecord> loo_records(const PartialState& s, EmulatorKind kind, const SolverOptions& opts = {}) {
  std::vector<CvRecord> out;
  if (s.t() < 2) return out;
  for (ObjectId i : s.evaluated()) {
    AlphaFit fit = kind == EmulatorKind::NN ? fit_alpha_nn(s, i) : fit_alpha_mm(s, i, opts);
    Vector pred = predict_row(s, fit);
    CvRecord r;
    r.t = s.t() - 1;
    r.object = i;
    r.features = compute_features(s, fit, i);
    r.delta_obs = row_rmse({pred.data(), static_cast<std::size_t>(pred.size())}, s.row_of(i), i);
    out.push_back(r);
  }
  return out;
}

/// delta of one target as a function of the distance x to a hypothetical
/// new evaluated object. Terms that do not depend on x are folded into a
/// constant once, so each evaluation costs a few flops.
class HypotheticalDelta {
 public:
  HypotheticalDelta(const VarianceFeatures& f, const GammaCoefficients& g) : evaluated_(f.evaluated) {
    if (evaluated_) return;
    auto on = [&](std::size_t k) {
      for (std::size_t a : active_features(g.mode))
        if (a == k) return g.coef[k];
      return 0.0;
    };
    const double t1 = f.t + 1.0;
    base_ = on(0) + on(1) * t1 + on(2) / t1 + on(3) * f.epsilon + on(4) * f.r1;
    g1_ = on(4);
    g2_ = on(5);
    ginf_ = on(6);
    r2sq_ = f.r2 * f.r2;
    r_inf_ = f.r_inf;
  }

  double operator()(double x) const {
    if (evaluated_) return 0.0;
    double d = base_ + g1_ * x + ginf_ * std::min(r_inf_, x);
    if (g2_ != 0.0) d += g2_ * std::sqrt(r2sq_ + x * x);
    return std::max(d, 0.0);
  }

 private:
  bool evaluated_ = false;
  double base_ = 0.0;
  double g1_ = 0.0;
  double g2_ = 0.0;
  double ginf_ = 0.0;
  double r2sq_ = 0.0;
  double r_inf_ = 0.0;
};

/// Single-target form of predict_delta_hypothetical.
inline double hypothetical_delta(const VarianceFeatures& f, const GammaCoefficients& g, double candidate_distance) {
  return HypotheticalDelta(f, g)(candidate_distance);
}

/// delta for each target if `candidate` were evaluated and its row equalled
/// `candidate_row` (plug-in mean). Epsilon is held fixed; only the distance
/// summaries move.
inline std::map<ObjectId, double> predict_delta_hypothetical(const PartialState& s, const GammaCoefficients& g,
                                                             ObjectId candidate, std::span<const double> candidate_row,
                                                             const std::map<ObjectId, VarianceFeatures>& targets) {
  if (s.is_evaluated(candidate)) throw InvalidInput("predict_delta_hypothetical: candidate already evaluated");
  std::map<ObjectId, double> out;
  for (const auto& [j, f] : targets) {
    if (f.evaluated || j == candidate) {
      out[j] = 0.0;
      continue;
    }
    out[j] = hypothetical_delta(f, g, candidate_row[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace dds
