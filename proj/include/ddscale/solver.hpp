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

// Constrained least-squares kernels: non-negative least squares,
// least squares over the probability simplex, and Euclidean projection
// onto the simplex.

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "ddscale/common.hpp"

namespace dds {

struct SolverOptions {
  /// Optimality tolerance on the (scaled) gradient.
  double kkt_tol = 1e-10;
  /// Entries at or below this are clamped to exactly zero.
  double clamp_tol = 1e-12;
  /// Allowed deviation of the weight sum from 1 before renormalization.
  double sum_tol = 1e-10;
  /// 0 selects 10n + 100.
  int max_iter = 0;
};

struct SimplexFit {
  Vector weights;
  /// Squared residual norm at the returned weights.
  double objective = 0.0;
  /// Set when a rank-deficient subproblem was met; the optimum may not be
  /// unique and the minimum-norm candidate was returned.
  bool degenerate = false;
  int iterations = 0;
};

namespace detail {

inline Vector solve_min_norm(const Eigen::MatrixXd& m, const Vector& rhs, bool& rank_deficient) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
  if (cod.rank() < std::min(m.rows(), m.cols())) rank_deficient = true;
  return cod.solve(rhs);
}

/// Square systems: LU when well conditioned, minimum-norm otherwise.
inline Vector solve_square(const Eigen::MatrixXd& m, const Vector& rhs, bool& rank_deficient) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const auto piv = lu.matrixLU().diagonal().cwiseAbs();
  if (piv.minCoeff() > 1e-12 * piv.maxCoeff()) {
    Vector x = lu.solve(rhs);
    if (x.allFinite()) return x;
  }
  return solve_min_norm(m, rhs, rank_deficient);
}

}  // namespace detail

/// Minimizes x'Gx - 2h'x over the probability simplex with a primal
/// active-set method. G is supplied through `gram(k, a)` so callers can
/// assemble entries lazily from cached sufficient statistics; only rows of
/// the free set are ever touched, so each outer iteration costs O(n |F|).
///
/// `warm` (optional, size n) seeds the free set; anything infeasible is
/// ignored and the best vertex is used instead.
template <class Gram>
SimplexFit simplex_qp(Index n, Gram&& gram, std::span<const double> h, std::span<const double> warm = {},
                      const SolverOptions& opts = {}) {
  if (n < 1) throw InvalidInput("simplex_qp: empty problem");
  if (static_cast<Index>(h.size()) != n) throw InvalidInput("simplex_qp: dimension mismatch");

  SimplexFit out;
  Vector alpha = Vector::Zero(n);
  std::vector<Index> free_set;

  double scale = 1.0;
  for (Index k = 0; k < n; ++k) scale = std::max({scale, std::abs(gram(k, k)), std::abs(h[k])});
  const double tol = opts.kkt_tol * scale;
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(10 * n + 100);

  bool warm_ok = static_cast<Index>(warm.size()) == n;
  if (warm_ok) {
    double s = 0.0;
    for (double w : warm) {
      if (!std::isfinite(w) || w < 0.0) warm_ok = false;
      s += w;
    }
    warm_ok = warm_ok && s > 0.0;
    if (warm_ok) {
      for (Index k = 0; k < n; ++k) {
        if (warm[k] > opts.clamp_tol) {
          alpha[k] = warm[k] / s;
          free_set.push_back(k);
        }
      }
      warm_ok = !free_set.empty();
      if (warm_ok) alpha /= alpha.sum();
    }
  }
  if (!warm_ok) {
    alpha.setZero();
    free_set.clear();
    Index best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < n; ++k) {
      double v = gram(k, k) - 2.0 * h[k];
      if (v < best_val) {
        best_val = v;
        best = k;
      }
    }
    alpha[best] = 1.0;
    free_set.push_back(best);
  }

  std::vector<char> in_free(n, 0);
  for (Index k : free_set) in_free[k] = 1;
  std::vector<char> tabu(n, 0);
  Index entering = -1;
  bool need_inner = free_set.size() > 1;
  Vector grad(n);

  // Solves the equality-constrained subproblem on the free set and walks
  // toward it, dropping coordinates that would turn negative.
  auto inner = [&]() {
    for (int guard = 0; guard < max_iter; ++guard) {
      const Index f = static_cast<Index>(free_set.size());
      Eigen::MatrixXd kkt(f + 1, f + 1);
      Vector rhs(f + 1);
      for (Index a = 0; a < f; ++a) {
        for (Index b = 0; b < f; ++b) kkt(a, b) = gram(free_set[a], free_set[b]);
        kkt(a, f) = 1.0;
        kkt(f, a) = 1.0;
        rhs[a] = h[free_set[a]];
      }
      kkt(f, f) = 0.0;
      rhs[f] = 1.0;
      Vector sol = detail::solve_square(kkt, rhs, out.degenerate);

      bool positive = true;
      for (Index a = 0; a < f; ++a) {
        if (!(sol[a] > opts.clamp_tol)) positive = false;
      }
      if (positive) {
        for (Index a = 0; a < f; ++a) alpha[free_set[a]] = sol[a];
        return;
      }
      double theta = 1.0;
      for (Index a = 0; a < f; ++a) {
        if (sol[a] <= opts.clamp_tol) {
          const double cur = alpha[free_set[a]];
          const double denom = cur - sol[a];
          theta = std::min(theta, denom > 0.0 ? cur / denom : 0.0);
        }
      }
      for (Index a = 0; a < f; ++a) {
        Index k = free_set[a];
        alpha[k] += theta * (sol[a] - alpha[k]);
      }
      std::vector<Index> kept;
      for (Index k : free_set) {
        if (alpha[k] > opts.clamp_tol) {
          kept.push_back(k);
        } else {
          alpha[k] = 0.0;
          in_free[k] = 0;
          if (k == entering && theta == 0.0) tabu[k] = 1;
        }
      }
      if (kept.empty()) {
        // Cannot happen in exact arithmetic; recover the largest weight.
        Index k = entering >= 0 ? entering : 0;
        kept.push_back(k);
        alpha[k] = 1.0;
        in_free[k] = 1;
      }
      free_set = std::move(kept);
      alpha /= alpha.sum();
    }
  };

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (need_inner) {
      inner();
      need_inner = false;
    }
    for (Index k = 0; k < n; ++k) {
      double g = -h[k];
      for (Index a : free_set) g += gram(k, a) * alpha[a];
      grad[k] = g;
    }
    double mu = 0.0;
    for (Index a : free_set) mu += alpha[a] * grad[a];
    Index best = -1;
    double best_val = -tol;
    for (Index k = 0; k < n; ++k) {
      if (in_free[k] || tabu[k]) continue;
      double v = grad[k] - mu;
      if (v < best_val) {
        best_val = v;
        best = k;
      }
    }
    if (best < 0) break;
    if (entering >= 0 && !tabu[entering]) std::fill(tabu.begin(), tabu.end(), 0);
    entering = best;
    free_set.push_back(best);
    in_free[best] = 1;
    need_inner = true;
  }
  out.iterations = iter;

  for (Index k = 0; k < n; ++k) {
    if (alpha[k] <= opts.clamp_tol) alpha[k] = 0.0;
  }
  alpha /= alpha.sum();

  double obj = 0.0;
  std::vector<Index> support;
  for (Index k = 0; k < n; ++k) {
    if (alpha[k] > 0.0) support.push_back(k);
  }
  for (Index a : support) {
    obj -= 2.0 * h[a] * alpha[a];
    for (Index b : support) obj += alpha[a] * gram(a, b) * alpha[b];
  }
  out.objective = obj;
  out.weights = std::move(alpha);
  return out;
}

/// argmin ||design * x - target||_2 subject to x >= 0 (Lawson-Hanson).
inline Vector nnls(const Eigen::Ref<const DenseMatrix>& design, const Eigen::Ref<const Vector>& target,
                   const SolverOptions& opts = {}) {
  const Index m = design.rows();
  const Index n = design.cols();
  if (m < 1 || n < 1) throw InvalidInput("nnls: empty design");
  if (target.size() != m) throw InvalidInput("nnls: target length does not match design rows");
  if (!design.allFinite() || !target.allFinite()) throw InvalidInput("nnls: non-finite input");

  const Eigen::MatrixXd a = design;
  Vector x = Vector::Zero(n);
  std::vector<char> passive(n, 0);
  std::vector<char> tabu(n, 0);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff() * std::max(1.0, target.cwiseAbs().maxCoeff()));
  const double tol = opts.kkt_tol * scale;
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(10 * n + 100);

  Vector w = a.transpose() * (target - a * x);
  Index entering = -1;
  for (int iter = 0; iter < max_iter; ++iter) {
    Index j = -1;
    double best = tol;
    for (Index k = 0; k < n; ++k) {
      if (!passive[k] && !tabu[k] && w[k] > best) {
        best = w[k];
        j = k;
      }
    }
    if (j < 0) break;
    if (entering >= 0 && !tabu[entering]) std::fill(tabu.begin(), tabu.end(), 0);
    entering = j;
    passive[j] = 1;

    for (int guard = 0; guard < max_iter; ++guard) {
      std::vector<Index> idx;
      for (Index k = 0; k < n; ++k) {
        if (passive[k]) idx.push_back(k);
      }
      Eigen::MatrixXd ap(m, static_cast<Index>(idx.size()));
      for (Index c = 0; c < static_cast<Index>(idx.size()); ++c) ap.col(c) = a.col(idx[c]);
      bool rd = false;
      Vector z = detail::solve_min_norm(ap, target, rd);
      bool positive = true;
      for (Index c = 0; c < z.size(); ++c) {
        if (!(z[c] > opts.clamp_tol)) positive = false;
      }
      if (positive) {
        x.setZero();
        for (Index c = 0; c < z.size(); ++c) x[idx[c]] = z[c];
        break;
      }
      double theta = 1.0;
      for (Index c = 0; c < z.size(); ++c) {
        if (z[c] <= opts.clamp_tol) {
          const double cur = x[idx[c]];
          const double denom = cur - z[c];
          theta = std::min(theta, denom > 0.0 ? cur / denom : 0.0);
        }
      }
      for (Index c = 0; c < z.size(); ++c) x[idx[c]] += theta * (z[c] - x[idx[c]]);
      for (Index k : idx) {
        if (x[k] <= opts.clamp_tol) {
          x[k] = 0.0;
          passive[k] = 0;
          if (k == entering && theta == 0.0) tabu[k] = 1;
        }
      }
      if (std::none_of(passive.begin(), passive.end(), [](char p) { return p != 0; })) break;
    }
    w = a.transpose() * (target - a * x);
  }
  for (Index k = 0; k < n; ++k) {
    if (x[k] < 0.0) x[k] = 0.0;
  }
  return x;
}

/// Same problem given the normal equations: argmin x'Gx - 2b'x, x >= 0,
/// with G = A'A and b = A'y. Cost depends only on the column count.
inline Vector nnls_gram(const Eigen::Ref<const Eigen::MatrixXd>& gram, const Eigen::Ref<const Vector>& b,
                        const SolverOptions& opts = {}) {
  const Index n = gram.rows();
  if (n < 1 || gram.cols() != n) throw InvalidInput("nnls_gram: Gram matrix must be square and non-empty");
  if (b.size() != n) throw InvalidInput("nnls_gram: right-hand side length mismatch");
  if (!gram.allFinite() || !b.allFinite()) throw InvalidInput("nnls_gram: non-finite input");

  Vector x = Vector::Zero(n);
  std::vector<char> passive(n, 0);
  std::vector<char> tabu(n, 0);
  const double scale = std::max({1.0, gram.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  const double tol = opts.kkt_tol * scale;
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(10 * n + 100);

  Vector w = b - gram * x;
  Index entering = -1;
  for (int iter = 0; iter < max_iter; ++iter) {
    Index j = -1;
    double best = tol;
    for (Index k = 0; k < n; ++k) {
      if (!passive[k] && !tabu[k] && w[k] > best) {
        best = w[k];
        j = k;
      }
    }
    if (j < 0) break;
    if (entering >= 0 && !tabu[entering]) std::fill(tabu.begin(), tabu.end(), 0);
    entering = j;
    passive[j] = 1;

    for (int guard = 0; guard < max_iter; ++guard) {
      std::vector<Index> idx;
      for (Index k = 0; k < n; ++k) {
        if (passive[k]) idx.push_back(k);
      }
      const Index p = static_cast<Index>(idx.size());
      Eigen::MatrixXd gp(p, p);
      Vector bp(p);
      for (Index r = 0; r < p; ++r) {
        bp[r] = b[idx[r]];
        for (Index c = 0; c < p; ++c) gp(r, c) = gram(idx[r], idx[c]);
      }
      bool rd = false;
      Vector z = detail::solve_square(gp, bp, rd);
      bool positive = true;
      for (Index c = 0; c < p; ++c) {
        if (!(z[c] > opts.clamp_tol)) positive = false;
      }
      if (positive) {
        x.setZero();
        for (Index c = 0; c < p; ++c) x[idx[c]] = z[c];
        break;
      }
      double theta = 1.0;
      for (Index c = 0; c < p; ++c) {
        if (z[c] <= opts.clamp_tol) {
          const double cur = x[idx[c]];
          const double denom = cur - z[c];
          theta = std::min(theta, denom > 0.0 ? cur / denom : 0.0);
        }
      }
      for (Index c = 0; c < p; ++c) x[idx[c]] += theta * (z[c] - x[idx[c]]);
      for (Index k : idx) {
        if (x[k] <= opts.clamp_tol) {
          x[k] = 0.0;
          passive[k] = 0;
          if (k == entering && theta == 0.0) tabu[k] = 1;
        }
      }
      if (std::none_of(passive.begin(), passive.end(), [](char q) { return q != 0; })) break;
    }
    w = b - gram * x;
  }
  for (Index k = 0; k < n; ++k) {
    if (x[k] < 0.0) x[k] = 0.0;
  }
  return x;
}

/// argmin ||design * a - target||_2 over the probability simplex.
inline SimplexFit simplex_ls(const Eigen::Ref<const DenseMatrix>& design, const Eigen::Ref<const Vector>& target,
                             const SolverOptions& opts = {}, std::span<const double> warm = {}) {
  const Index n = design.cols();
  if (n < 1) throw InvalidInput("simplex_ls: design has no columns");
  if (target.size() != design.rows()) throw InvalidInput("simplex_ls: target length does not match design rows");
  if (!design.allFinite() || !target.allFinite()) throw InvalidInput("simplex_ls: non-finite input");

  const Eigen::MatrixXd gram = design.transpose() * design;
  const Vector h = design.transpose() * target;
  SimplexFit fit = simplex_qp(
      n, [&](Index a, Index b) { return gram(a, b); }, std::span<const double>(h.data(), h.size()), warm, opts);
  fit.objective = (design * fit.weights - target).squaredNorm();
  return fit;
}

/// Euclidean projection onto the probability simplex (sort and threshold).
inline Vector project_to_simplex(const Eigen::Ref<const Vector>& v, const SolverOptions& opts = {}) {
  const Index n = v.size();
  if (n < 1) throw InvalidInput("project_to_simplex: empty vector");
  if (!v.allFinite()) throw InvalidInput("project_to_simplex: non-finite input");

  // Points already on the simplex are returned bit-for-bit.
  if (v.minCoeff() >= 0.0 && std::abs(v.sum() - 1.0) <= 1e-12) return v;

  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Index k = 0; k < n; ++k) {
    cumsum += u[k];
    double cand = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - cand > 0.0) tau = cand;
  }
  Vector out(n);
  for (Index k = 0; k < n; ++k) {
    double x = v[k] - tau;
    out[k] = x > opts.clamp_tol ? x : 0.0;
  }
  out /= out.sum();
  return out;
}

}  // namespace dds
