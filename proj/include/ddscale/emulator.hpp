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

// Data Directional Scaling mean prediction.
//
// Every object i gets a position alpha_i on the simplex spanned by the
// evaluated objects. It is learned from the observed column X(Omega, i)
// (distances from the evaluated objects to i) and used to predict the
// unobserved row X(i, .) as a mixture of the observed rows.
//
// Self-swap: in the learning design the self entry X(k, k) of column k is
// replaced by X(k, i); when predicting, row k contributes X(k, i) at
// column k and X(k, k) at column i.

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include "ddscale/solver.hpp"
#include "ddscale/state.hpp"

namespace dds {

enum class EmulatorKind { NN, MM };

inline const char* to_string(EmulatorKind k) { return k == EmulatorKind::NN ? "nn" : "mm"; }

struct AlphaFit {
  ObjectId object = -1;
  /// Evaluated objects spanning the simplex, in evaluation order.
  std::vector<ObjectId> basis;
  Vector alpha;
  /// Positions k with alpha[k] != 0, ascending. Left empty by hand-built
  /// fits, in which case every position is scanned.
  std::vector<Index> support;
  /// RMS in-sample residual on the learning column.
  double epsilon = 0.0;
  EmulatorKind method = EmulatorKind::MM;
  /// Fit made with the object's own row and column held out.
  bool cross_validation = false;
  bool degenerate = false;
};

struct LearningColumn {
  DenseMatrix design;
  Vector target;
  std::vector<ObjectId> basis;
};

/// Builds the learning regression for object i. When i is itself evaluated
/// its row and column are excluded (cross-validation use).
inline LearningColumn learning_column(const PartialState& s, ObjectId i) {
  if (s.t() == 0) throw EmptyState("learning_column: no evaluated objects");
  if (i < 0 || i >= s.size()) throw InvalidInput("learning_column: object id out of range");
  LearningColumn lc;
  std::vector<Index> pos;
  for (Index p = 0; p < s.t(); ++p) {
    if (s.evaluated()[p] != i) {
      pos.push_back(p);
      lc.basis.push_back(s.evaluated()[p]);
    }
  }
  const Index m = static_cast<Index>(pos.size());
  if (m == 0) throw EmptyState("learning_column: no evaluated objects besides the target");
  lc.design.resize(m, m);
  lc.target.resize(m);
  for (Index r = 0; r < m; ++r) {
    for (Index c = 0; c < m; ++c) lc.design(r, c) = s.at(pos[r], lc.basis[c]);
    lc.design(r, r) = s.at(pos[r], i);
    lc.target[r] = s.at(pos[r], i);
  }
  return lc;
}

namespace detail {

inline double rms(const Vector& r) { return r.size() ? std::sqrt(r.squaredNorm() / static_cast<double>(r.size())) : 0.0; }

inline void fill_support(AlphaFit& f) {
  f.support.clear();
  for (Index k = 0; k < f.alpha.size(); ++k) {
    if (f.alpha[k] != 0.0) f.support.push_back(k);
  }
}

/// Calls fn(k) for every k with a possibly nonzero weight.
template <class Fn>
void for_each_weight(const AlphaFit& f, Fn&& fn) {
  if (f.support.empty()) {
    for (Index k = 0; k < f.alpha.size(); ++k) {
      if (f.alpha[k] != 0.0) fn(k);
    }
  } else {
    for (Index k : f.support) fn(k);
  }
}

}  // namespace detail

/// Nearest neighbour: one-hot at the smallest distance in the learning
/// column, ties to the lowest object id.
inline AlphaFit fit_alpha_nn(const PartialState& s, ObjectId i) {
  LearningColumn lc = learning_column(s, i);
  const Index m = lc.target.size();
  Index best = 0;
  for (Index k = 1; k < m; ++k) {
    if (lc.target[k] < lc.target[best] || (lc.target[k] == lc.target[best] && lc.basis[k] < lc.basis[best])) best = k;
  }
  AlphaFit f;
  f.object = i;
  f.method = EmulatorKind::NN;
  f.cross_validation = s.is_evaluated(i);
  f.alpha = Vector::Zero(m);
  f.alpha[best] = 1.0;
  f.support = {best};
  f.epsilon = detail::rms(lc.design * f.alpha - lc.target);
  f.basis = std::move(lc.basis);
  return f;
}

/// Mixture model: simplex-constrained least squares on the learning column.
inline AlphaFit fit_alpha_mm(const PartialState& s, ObjectId i, const SolverOptions& opts = {}) {
  LearningColumn lc = learning_column(s, i);
  SimplexFit sf = simplex_ls(lc.design, lc.target, opts);
  AlphaFit f;
  f.object = i;
  f.method = EmulatorKind::MM;
  f.cross_validation = s.is_evaluated(i);
  f.alpha = std::move(sf.weights);
  detail::fill_support(f);
  f.epsilon = detail::rms(lc.design * f.alpha - lc.target);
  f.degenerate = sf.degenerate;
  f.basis = std::move(lc.basis);
  return f;
}

/// Predicted distance X(i, j) under `fit`, i = fit.object.
inline double predict_entry(const PartialState& s, const AlphaFit& fit, ObjectId j) {
  const ObjectId i = fit.object;
  double v = 0.0;
  detail::for_each_weight(fit, [&](Index k) {
    const double a = fit.alpha[k];
    const ObjectId obj = fit.basis[static_cast<std::size_t>(k)];
    const Index p = s.position(obj);
    ObjectId col = j;
    if (j == obj) {
      col = i;
    } else if (j == i) {
      col = obj;
    }
    v += a * s.at(p, col);
  });
  return v;
}

/// Predicted row of fit.object. Evaluated objects (outside cross-validation)
/// return their observed row.
inline Vector predict_row(const PartialState& s, const AlphaFit& fit) {
  const Index n = s.size();
  const ObjectId i = fit.object;
  if (!fit.cross_validation && s.is_evaluated(i)) {
    auto r = s.row_of(i);
    return Eigen::Map<const Vector>(r.data(), n);
  }
  if (static_cast<Index>(fit.basis.size()) != fit.alpha.size()) throw InvalidInput("predict_row: alpha/basis mismatch");
  Vector out = Vector::Zero(n);
  detail::for_each_weight(fit, [&](Index k) {
    const double a = fit.alpha[k];
    const ObjectId obj = fit.basis[static_cast<std::size_t>(k)];
    auto row = s.row_of(obj);
    out += a * Eigen::Map<const Vector>(row.data(), n);
    // Undo the plain contribution at the swapped positions.
    out[obj] += a * (row[static_cast<std::size_t>(i)] - row[static_cast<std::size_t>(obj)]);
    out[i] += a * (row[static_cast<std::size_t>(obj)] - row[static_cast<std::size_t>(i)]);
  });
  return out;
}

/// Incrementally maintained emulator over a growing PartialState.
///
/// Distance summaries (nearest evaluated object, L1 and L2 sums) are updated
/// for every object on each insertion in O(N). The mixture model keeps the
/// Gram matrix of the evaluated block and, per object, the cross products
/// with its column; both are brought up to date lazily on the next fit, so
/// runs and objects that never fit cost nothing.
class Emulator {
 public:
  Emulator() = default;
  Emulator(EmulatorKind kind, Index n, SolverOptions opts = {})
      : kind_(kind),
        opts_(opts),
        n_(n),
        nearest_pos_(static_cast<std::size_t>(n), -1),
        r_inf_(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity()),
        r1_(static_cast<std::size_t>(n), 0.0),
        r2sq_(static_cast<std::size_t>(n), 0.0),
        nn_sse_(static_cast<std::size_t>(n), 0.0),
        cross_(static_cast<std::size_t>(n)),
        warm_(static_cast<std::size_t>(n)) {}

  EmulatorKind kind() const { return kind_; }
  const SolverOptions& options() const { return opts_; }
  Index rows_seen() const { return seen_; }

  /// Absorbs every row of `s` not yet seen.
  void sync(const PartialState& s) {
    while (seen_ < s.t()) absorb(s, seen_++);
  }

  double r_inf(ObjectId i) const { return r_inf_[static_cast<std::size_t>(i)]; }
  double r1(ObjectId i) const { return r1_[static_cast<std::size_t>(i)]; }
  double r2(ObjectId i) const { return std::sqrt(r2sq_[static_cast<std::size_t>(i)]); }
  /// Nearest evaluated object to i (column-wise), ties to lowest id.
  ObjectId nearest(const PartialState& s, ObjectId i) const {
    Index p = nearest_pos_[static_cast<std::size_t>(i)];
    return p < 0 ? -1 : s.evaluated()[p];
  }

  /// Fits alpha for an unevaluated object using the cached statistics.
  AlphaFit fit(const PartialState& s, ObjectId i) {
    sync(s);
    if (s.t() == 0) throw EmptyState("Emulator::fit: no evaluated objects");
    if (s.is_evaluated(i)) throw InvalidInput("Emulator::fit: object is evaluated; use fit_alpha_* for cross-validation");
    return kind_ == EmulatorKind::NN ? fit_nn(s, i) : fit_mm(s, i);
  }

 private:
  void absorb(const PartialState& s, Index p) {
    const ObjectId o = s.evaluated()[p];
    for (ObjectId i = 0; i < n_; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double v = s.at(p, i);
      r1_[ui] += v;
      r2sq_[ui] += v * v;
      const Index cur = nearest_pos_[ui];
      const bool closer = cur < 0 || v < r_inf_[ui] || (v == r_inf_[ui] && o < s.evaluated()[cur]);
      if (closer) {
        r_inf_[ui] = v;
        nearest_pos_[ui] = p;
        if (kind_ == EmulatorKind::NN) {
          double sse = 0.0;
          for (Index j = 0; j < p; ++j) {
            double d = s.at(j, o) - s.at(j, i);
            sse += d * d;
          }
          nn_sse_[ui] = sse;
        }
      } else if (kind_ == EmulatorKind::NN) {
        double d = s.at(p, s.evaluated()[cur]) - v;
        nn_sse_[ui] += d * d;
      }
    }
  }

  /// Extends the Gram matrix of the evaluated block's columns to all rows
  /// absorbed so far.
  void catch_up_gram(const PartialState& s) {
    for (Index p = gram_.rows(); p < seen_; ++p) {
      const ObjectId o = s.evaluated()[p];
      const Index t = p + 1;
      gram_.conservativeResize(t, t);
      for (Index a = 0; a < p; ++a) {
        const double xa = s.at(p, s.evaluated()[a]);
        for (Index b = 0; b < p; ++b) gram_(a, b) += xa * s.at(p, s.evaluated()[b]);
      }
      for (Index a = 0; a < t; ++a) {
        double g = 0.0;
        for (Index j = 0; j < t; ++j) g += s.at(j, s.evaluated()[a]) * s.at(j, o);
        gram_(a, p) = g;
        gram_(p, a) = g;
      }
    }
  }

  AlphaFit fit_nn(const PartialState& s, ObjectId i) const {
    const auto ui = static_cast<std::size_t>(i);
    AlphaFit f;
    f.object = i;
    f.method = EmulatorKind::NN;
    f.basis.assign(s.evaluated().begin(), s.evaluated().end());
    f.alpha = Vector::Zero(s.t());
    f.alpha[nearest_pos_[ui]] = 1.0;
    f.support = {nearest_pos_[ui]};
    f.epsilon = std::sqrt(nn_sse_[ui] / static_cast<double>(s.t()));
    return f;
  }

  struct Cross {
    std::vector<double> h;  // h[a] = sum_j X(j, Omega[a]) X(j, i)
  };

  void catch_up(const PartialState& s, ObjectId i) {
    auto& h = cross_[static_cast<std::size_t>(i)].h;
    const Index t = s.t();
    for (Index p = static_cast<Index>(h.size()); p < t; ++p) {
      const double xi = s.at(p, i);
      for (Index a = 0; a < p; ++a) h[static_cast<std::size_t>(a)] += s.at(p, s.evaluated()[a]) * xi;
      const ObjectId o = s.evaluated()[p];
      double g = 0.0;
      for (Index j = 0; j <= p; ++j) g += s.at(j, o) * s.at(j, i);
      h.push_back(g);
    }
  }

  AlphaFit fit_mm(const PartialState& s, ObjectId i) {
    catch_up_gram(s);
    catch_up(s, i);
    const Index t = s.t();
    const auto& h0 = cross_[static_cast<std::size_t>(i)].h;
    std::vector<double> d(static_cast<std::size_t>(t));
    std::vector<double> b(static_cast<std::size_t>(t));
    std::vector<double> h(static_cast<std::size_t>(t));
    for (Index a = 0; a < t; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      b[ua] = s.at(a, i);
      d[ua] = b[ua] - s.at(a, s.evaluated()[a]);
      h[ua] = h0[ua] + d[ua] * b[ua];
    }
    auto gram = [&](Index k, Index a) {
      double g = gram_(k, a) + s.at(a, s.evaluated()[k]) * d[static_cast<std::size_t>(a)] +
                 d[static_cast<std::size_t>(k)] * s.at(k, s.evaluated()[a]);
      if (k == a) g += d[static_cast<std::size_t>(k)] * d[static_cast<std::size_t>(k)];
      return g;
    };
    auto& warm = warm_[static_cast<std::size_t>(i)];
    warm.resize(static_cast<std::size_t>(t), 0.0);
    SimplexFit sf = simplex_qp(t, gram, h, warm, opts_);
    warm.assign(sf.weights.data(), sf.weights.data() + t);

    AlphaFit f;
    f.object = i;
    f.method = EmulatorKind::MM;
    f.basis.assign(s.evaluated().begin(), s.evaluated().end());
    f.alpha = std::move(sf.weights);
    detail::fill_support(f);
    f.degenerate = sf.degenerate;
    // Residual computed directly; the Gram form loses precision near zero.
    double sse = 0.0;
    for (Index j = 0; j < t; ++j) {
      double r = -b[static_cast<std::size_t>(j)];
      for (Index k : f.support) r += f.alpha[k] * (j == k ? b[static_cast<std::size_t>(j)] : s.at(j, s.evaluated()[k]));
      sse += r * r;
    }
    f.epsilon = std::sqrt(sse / static_cast<double>(t));
    return f;
  }

  EmulatorKind kind_ = EmulatorKind::MM;
  SolverOptions opts_;
  Index n_ = 0;
  Index seen_ = 0;
  std::vector<Index> nearest_pos_;
  std::vector<double> r_inf_;
  std::vector<double> r1_;
  std::vector<double> r2sq_;
  std::vector<double> nn_sse_;
  Eigen::MatrixXd gram_;
  std::vector<Cross> cross_;
  std::vector<std::vector<double>> warm_;
};

}  // namespace dds
