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

// Proposal generation and decision. Every proposal targets an unevaluated
// row or element; `decide` picks the action with the largest estimated loss
// reduction net of its compute cost.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "ddscale/emulator.hpp"
#include "ddscale/variance.hpp"

namespace dds {

enum class Strategy { RMSE_LOSS, FURTHEST, RANDOM, PRIOR_LABEL };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::RMSE_LOSS: return "rmse_loss";
    case Strategy::FURTHEST: return "furthest";
    case Strategy::RANDOM: return "random";
    case Strategy::PRIOR_LABEL: return "prior_label";
  }
  return "?";
}

enum class ActionKind { GlobalRow, LocalElement, Stop };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::GlobalRow: return "global";
    case ActionKind::LocalElement: return "local";
    case ActionKind::Stop: return "stop";
  }
  return "?";
}

struct Action {
  ActionKind kind = ActionKind::Stop;
  ObjectId i = -1;
  ObjectId j = -1;
  /// Absent for single heuristic proposals that were not scored.
  std::optional<double> est_loss_reduction;
  /// In evaluation-cost units.
  double cost = 0.0;

  static Action global(ObjectId i, double cost) { return {ActionKind::GlobalRow, i, -1, std::nullopt, cost}; }
  static Action local(ObjectId i, ObjectId j, double cost) { return {ActionKind::LocalElement, i, j, std::nullopt, cost}; }
  static Action stop() { return {}; }
};

enum class LossNorm { L1, L2, LInf };
enum class WeightKind { Uniform, Threshold };

struct LossSpec {
  LossNorm norm = LossNorm::L2;
  WeightKind weight = WeightKind::Uniform;
  /// Threshold weights: w = 1 when the predicted distance is at or below
  /// this value, else 0.
  double weight_threshold = std::numeric_limits<double>::infinity();
  /// Loss units per cost unit.
  double cost_coefficient = 0.0;
  /// Cost of one element evaluation.
  double element_cost = 1.0;

  double weight_of(double predicted) const {
    return weight == WeightKind::Uniform ? 1.0 : (predicted <= weight_threshold ? 1.0 : 0.0);
  }
  double power(double delta) const {
    switch (norm) {
      case LossNorm::L1: return delta;
      case LossNorm::L2: return delta * delta;
      case LossNorm::LInf: return delta;
    }
    return delta;
  }
};

/// q-quantile of observed off-diagonal distances, for threshold weights.
inline double observed_quantile(const PartialState& s, double q) {
  std::vector<double> v;
  for (Index p = 0; p < s.t(); ++p) {
    for (ObjectId j = 0; j < s.size(); ++j) {
      if (j != s.evaluated()[p]) v.push_back(s.at(p, j));
    }
  }
  if (v.empty()) return std::numeric_limits<double>::infinity();
  q = std::clamp(q, 0.0, 1.0);
  auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

/// Uniform over unevaluated objects.
inline Action propose_random(const PartialState& s, Rng& rng, double cost = 1.0) {
  auto u = s.unevaluated();
  if (u.empty()) throw InvalidInput("propose_random: nothing left to evaluate");
  std::uniform_int_distribution<std::size_t> pick(0, u.size() - 1);
  return Action::global(u[pick(rng)], cost);
}

/// Farthest-point sampling computed directly from the observed rows.
inline Action propose_furthest(const PartialState& s, double cost = 1.0) {
  if (s.t() == 0) throw EmptyState("propose_furthest: no evaluated objects");
  ObjectId best = -1;
  double best_d = -std::numeric_limits<double>::infinity();
  for (ObjectId i = 0; i < s.size(); ++i) {
    if (s.is_evaluated(i)) continue;
    double d = std::numeric_limits<double>::infinity();
    for (Index p = 0; p < s.t(); ++p) d = std::min(d, s.at(p, i));
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  if (best < 0) throw InvalidInput("propose_furthest: nothing left to evaluate");
  return Action::global(best, cost);
}

/// Farthest-point sampling from the emulator's running minima, O(N).
inline Action propose_furthest(const PartialState& s, const Emulator& em, double cost = 1.0) {
  if (s.t() == 0) throw EmptyState("propose_furthest: no evaluated objects");
  ObjectId best = -1;
  double best_d = -std::numeric_limits<double>::infinity();
  for (ObjectId i = 0; i < s.size(); ++i) {
    if (s.is_evaluated(i)) continue;
    if (em.r_inf(i) > best_d) {
      best_d = em.r_inf(i);
      best = i;
    }
  }
  if (best < 0) throw InvalidInput("propose_furthest: nothing left to evaluate");
  return Action::global(best, cost);
}

/// Label-balanced picks: a random unevaluated member of a label with the
/// fewest evaluated members (ties between labels broken at random).
inline Action propose_prior_label(const PartialState& s, std::span<const int> labels, Rng& rng, double cost = 1.0) {
  if (static_cast<Index>(labels.size()) != s.size()) throw InvalidInput("propose_prior_label: labels must cover all objects");
  std::map<int, Index> evaluated_count;
  std::map<int, std::vector<ObjectId>> open;
  for (ObjectId i = 0; i < s.size(); ++i) {
    int lab = labels[static_cast<std::size_t>(i)];
    evaluated_count.try_emplace(lab, 0);
    if (s.is_evaluated(i)) {
      ++evaluated_count[lab];
    } else {
      open[lab].push_back(i);
    }
  }
  if (open.empty()) throw InvalidInput("propose_prior_label: nothing left to evaluate");
  Index fewest = std::numeric_limits<Index>::max();
  for (const auto& [lab, members] : open) fewest = std::min(fewest, evaluated_count[lab]);
  std::vector<int> tied;
  for (const auto& [lab, members] : open) {
    if (evaluated_count[lab] == fewest) tied.push_back(lab);
  }
  std::uniform_int_distribution<std::size_t> pick_label(0, tied.size() - 1);
  const auto& members = open[tied[pick_label(rng)]];
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  return Action::global(members[pick(rng)], cost);
}

/// Everything the loss-based proposals read; a frozen snapshot per iteration.
struct ChoiceContext {
  const PartialState& state;
  Emulator& emulator;
  const GammaCoefficients& gamma;
  const LossSpec& loss;
};

struct TargetInfo {
  ObjectId id = -1;
  AlphaFit fit;
  VarianceFeatures features;
  double delta = 0.0;
  double weight = 1.0;
  std::optional<HypotheticalDelta> after;
};

inline TargetInfo describe_target(ChoiceContext& ctx, ObjectId j) {
  TargetInfo ti;
  ti.id = j;
  ti.fit = ctx.emulator.fit(ctx.state, j);
  ti.features = cached_features(ctx.state, ctx.emulator, ti.fit, j);
  ti.delta = predict_delta(ti.features, ctx.gamma);
  ti.after.emplace(ti.features, ctx.gamma);
  if (ctx.loss.weight != WeightKind::Uniform) {
    Vector row = predict_row(ctx.state, ti.fit);
    double w = 0.0;
    for (ObjectId k = 0; k < ctx.state.size(); ++k) {
      if (k != j) w += ctx.loss.weight_of(row[k]);
    }
    ti.weight = ctx.state.size() > 1 ? w / static_cast<double>(ctx.state.size() - 1) : 0.0;
  }
  return ti;
}

/// Aggregated sample loss: mean of w * delta^n (max for the infinity norm).
template <class DeltaFn>
double sample_loss(const std::vector<TargetInfo>& targets, const LossSpec& loss, DeltaFn&& delta_of) {
  if (targets.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& ti : targets) {
    double v = ti.weight * loss.power(delta_of(ti));
    acc = loss.norm == LossNorm::LInf ? std::max(acc, v) : acc + v;
  }
  return loss.norm == LossNorm::LInf ? acc : acc / static_cast<double>(targets.size());
}

struct CandidateScore {
  ObjectId candidate = -1;
  double loss_after = 0.0;
};

/// Plug-in estimate of the sample loss after evaluating each candidate.
inline std::vector<CandidateScore> score_candidates(ChoiceContext& ctx, const std::vector<TargetInfo>& targets,
                                                    const std::vector<const TargetInfo*>& candidates) {
  std::vector<CandidateScore> out;
  out.reserve(candidates.size());
  for (const TargetInfo* cand : candidates) {
    const ObjectId m = cand->id;
    double after = sample_loss(targets, ctx.loss, [&](const TargetInfo& ti) {
      if (ti.id == m) return 0.0;
      return (*ti.after)(predict_entry(ctx.state, cand->fit, ti.id));
    });
    out.push_back({m, after});
  }
  return out;
}

/// Converts a sample-loss difference to mean per-element loss over the
/// whole matrix so it is comparable with local element reductions.
inline double to_element_units(double sample_reduction, const PartialState& s, LossNorm norm) {
  if (norm == LossNorm::LInf) return sample_reduction;
  const double n = static_cast<double>(s.size());
  return sample_reduction * (n - static_cast<double>(s.t())) / n;
}

inline std::vector<ObjectId> sample_unevaluated(const PartialState& s, Index p, Rng& rng) {
  auto u = s.unevaluated();
  p = std::min<Index>(p, static_cast<Index>(u.size()));
  for (Index k = 0; k < p; ++k) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), u.size() - 1);
    std::swap(u[static_cast<std::size_t>(k)], u[pick(rng)]);
  }
  u.resize(static_cast<std::size_t>(p));
  return u;
}

/// RMSE-loss proposal: p = min(p_cap, N - t) random unevaluated objects plus
/// the furthest one form both the candidate set and the Monte-Carlo sample
/// on which each candidate's post-evaluation loss is estimated.
inline Action propose_rmse_loss(ChoiceContext& ctx, Rng& rng, Index p_cap = 80) {
  const PartialState& s = ctx.state;
  const double cost = static_cast<double>(s.size()) * ctx.loss.element_cost;
  const Index remaining = s.size() - s.t();
  if (remaining < 1) throw InvalidInput("propose_rmse_loss: nothing left to evaluate");
  if (remaining == 1) return Action::global(s.unevaluated().front(), cost);
  if (s.t() == 0) return propose_random(s, rng, cost);

  auto ids = sample_unevaluated(s, p_cap, rng);
  ids.push_back(propose_furthest(s, ctx.emulator).i);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<TargetInfo> targets;
  targets.reserve(ids.size());
  for (ObjectId j : ids) targets.push_back(describe_target(ctx, j));
  std::vector<const TargetInfo*> cands;
  for (const auto& ti : targets) cands.push_back(&ti);

  const double before = sample_loss(targets, ctx.loss, [](const TargetInfo& ti) { return ti.delta; });
  auto scores = score_candidates(ctx, targets, cands);
  const CandidateScore* best = &scores.front();
  for (const auto& sc : scores) {
    if (sc.loss_after < best->loss_after) best = &sc;
  }
  Action a = Action::global(best->candidate, cost);
  a.est_loss_reduction = std::max(0.0, to_element_units(before - best->loss_after, s, ctx.loss.norm));
  return a;
}

/// Plug-in reduction estimate for one given global candidate (used to put
/// heuristic proposals on the same footing as local ones).
inline double estimate_global_reduction(ChoiceContext& ctx, ObjectId m, Rng& rng, Index p_cap = 80) {
  const PartialState& s = ctx.state;
  auto ids = sample_unevaluated(s, p_cap, rng);
  ids.push_back(m);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<TargetInfo> targets;
  for (ObjectId j : ids) targets.push_back(describe_target(ctx, j));
  const TargetInfo* cand = nullptr;
  for (const auto& ti : targets) {
    if (ti.id == m) cand = &ti;
  }
  const double before = sample_loss(targets, ctx.loss, [](const TargetInfo& ti) { return ti.delta; });
  auto sc = score_candidates(ctx, targets, {cand});
  return std::max(0.0, to_element_units(before - sc.front().loss_after, s, ctx.loss.norm));
}

/// Top-k unevaluated elements by individual loss contribution w_ij delta_i^n.
/// Elements in evaluated rows, self entries and already evaluated elements
/// are skipped; zero-weight elements are never proposed.
inline std::vector<Action> propose_local(ChoiceContext& ctx, Index k_top) {
  const PartialState& s = ctx.state;
  if (s.t() == 0) throw EmptyState("propose_local: no evaluated objects");
  struct Scored {
    double score;
    ObjectId i;
    ObjectId j;
  };
  std::vector<Scored> all;
  for (ObjectId i : s.unevaluated()) {
    TargetInfo ti = describe_target(ctx, i);
    const double base = ctx.loss.power(ti.delta);
    if (base <= 0.0) continue;
    Vector row;
    if (ctx.loss.weight != WeightKind::Uniform) row = predict_row(s, ti.fit);
    for (ObjectId j = 0; j < s.size(); ++j) {
      if (j == i || s.local_elements().count({i, j})) continue;
      const double w = ctx.loss.weight == WeightKind::Uniform ? 1.0 : ctx.loss.weight_of(row[j]);
      if (w <= 0.0) continue;
      all.push_back({w * base, i, j});
    }
  }
  auto better = [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  };
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max<Index>(k_top, 0)), all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
  const double n = static_cast<double>(s.size());
  const double elements = ctx.loss.norm == LossNorm::LInf ? 1.0 : n * (n - 1.0);
  std::vector<Action> out;
  for (std::size_t q = 0; q < k; ++q) {
    Action a = Action::local(all[q].i, all[q].j, ctx.loss.element_cost);
    a.est_loss_reduction = all[q].score / elements;
    out.push_back(a);
  }
  return out;
}

/// Picks argmax of reduction - c * cost. Ties: global before local, then
/// lowest ids. Returns Stop when `stop_allowed` and every net value is
/// negative.
inline Action decide(const std::vector<Action>& actions, const LossSpec& loss, bool stop_allowed = false) {
  if (actions.empty()) throw InvalidInput("decide: no actions");
  if (actions.size() == 1 && !stop_allowed) return actions.front();
  auto net = [&](const Action& a) { return a.est_loss_reduction.value_or(0.0) - loss.cost_coefficient * a.cost; };
  auto order_key = [](const Action& a) { return std::tuple(a.kind == ActionKind::GlobalRow ? 0 : 1, a.i, a.j); };
  const Action* best = nullptr;
  for (const auto& a : actions) {
    if (a.kind == ActionKind::Stop) continue;
    if (!best || net(a) > net(*best) || (net(a) == net(*best) && order_key(a) < order_key(*best))) best = &a;
  }
  if (!best) return Action::stop();
  if (stop_allowed && net(*best) < 0.0) return Action::stop();
  return *best;
}

}  // namespace dds
