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

// Independent oracles and fixtures shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ddscale/common.hpp"
#include "ddscale/state.hpp"

namespace ddtest {

using dds::DenseMatrix;
using dds::Index;
using dds::ObjectId;
using dds::Vector;

inline DenseMatrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseMatrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index k = 0; k < n; ++k) v[k] = u(rng);
  return v;
}

/// Columns of `a` selected by the bits of `mask`.
inline Eigen::MatrixXd columns(const DenseMatrix& a, unsigned mask, std::vector<Index>& idx) {
  idx.clear();
  for (Index k = 0; k < a.cols(); ++k)
    if (mask & (1u << k)) idx.push_back(k);
  Eigen::MatrixXd out(a.rows(), static_cast<Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Index>(c)) = a.col(idx[c]);
  return out;
}

/// min ||a x - b||^2 over x >= 0: every support set is solved unconstrained
/// and the best feasible candidate wins.
inline double nnls_enumerate(const DenseMatrix& a, const Vector& b, Vector* argmin = nullptr) {
  const Index n = a.cols();
  double best = b.squaredNorm();
  if (argmin) *argmin = Vector::Zero(n);
  std::vector<Index> idx;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    Eigen::MatrixXd as = columns(a, mask, idx);
    Vector xs = as.completeOrthogonalDecomposition().solve(b);
    if (xs.minCoeff() < 0.0) continue;
    const double obj = (as * xs - b).squaredNorm();
    if (obj < best) {
      best = obj;
      if (argmin) {
        *argmin = Vector::Zero(n);
        for (std::size_t c = 0; c < idx.size(); ++c) (*argmin)[idx[c]] = xs[static_cast<Index>(c)];
      }
    }
  }
  return best;
}

/// min ||a x - b||^2 over the probability simplex, by support enumeration
/// of the equality-constrained subproblem.
inline double simplex_enumerate(const DenseMatrix& a, const Vector& b, Vector* argmin = nullptr) {
  const Index n = a.cols();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Index> idx;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    Eigen::MatrixXd as = columns(a, mask, idx);
    const Index k = as.cols();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = 2.0 * as.transpose() * as;
    kkt.topRightCorner(k, 1).setOnes();
    kkt.bottomLeftCorner(1, k).setOnes();
    Vector rhs(k + 1);
    rhs.head(k) = 2.0 * as.transpose() * b;
    rhs[k] = 1.0;
    Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Vector xs = sol.head(k);
    if (xs.minCoeff() < 0.0 || std::abs(xs.sum() - 1.0) > 1e-9) continue;
    const double obj = (as * xs - b).squaredNorm();
    if (obj < best) {
      best = obj;
      if (argmin) {
        *argmin = Vector::Zero(n);
        for (std::size_t c = 0; c < idx.size(); ++c) (*argmin)[idx[c]] = xs[static_cast<Index>(c)];
      }
    }
  }
  return best;
}

/// Distance-scale matrix whose rows are exact simplex mixtures of R
/// archetype rows in a way that survives the self-swap: the learning
/// regression of every non-archetype object on the archetypes has a zero
/// residual, and so does the predicted row.
struct MixtureMatrix {
  DenseMatrix x;
  std::vector<ObjectId> archetypes;
  DenseMatrix weights;  // N x R; archetype rows are one-hot
};

inline MixtureMatrix mixture_matrix(Index n, Index r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::gamma_distribution<double> g(1.0, 1.0);
  MixtureMatrix m;
  m.x = DenseMatrix::Zero(n, n);
  m.weights = DenseMatrix::Zero(n, r);
  // Archetypes spread through the id range.
  for (Index k = 0; k < r; ++k) m.archetypes.push_back(static_cast<ObjectId>(k * (n / r)));
  std::vector<Index> arch_of(static_cast<std::size_t>(n), -1);
  for (Index k = 0; k < r; ++k) arch_of[static_cast<std::size_t>(m.archetypes[k])] = k;

  for (ObjectId i = 0; i < n; ++i) {
    const Index k = arch_of[static_cast<std::size_t>(i)];
    if (k >= 0) {
      m.weights(i, k) = 1.0;
      continue;
    }
    double s = 0.0;
    for (Index c = 0; c < r; ++c) s += (m.weights(i, c) = g(rng) + 0.05);
    m.weights.row(i) /= s;
  }
  // Archetype block.
  for (Index a = 0; a < r; ++a)
    for (Index b = 0; b < r; ++b) m.x(m.archetypes[a], m.archetypes[b]) = a == b ? 0.0 : u(rng);
  // Archetype rows at non-archetype columns.
  for (Index a = 0; a < r; ++a) {
    for (ObjectId i = 0; i < n; ++i) {
      if (arch_of[static_cast<std::size_t>(i)] >= 0) continue;
      double v = 0.0;
      for (Index c = 0; c < r; ++c)
        if (c != a) v += m.weights(i, c) * m.x(m.archetypes[a], m.archetypes[c]);
      m.x(m.archetypes[a], i) = v / (1.0 - m.weights(i, a));
    }
  }
  // Non-archetype rows.
  for (ObjectId i = 0; i < n; ++i) {
    if (arch_of[static_cast<std::size_t>(i)] >= 0) continue;
    for (ObjectId j = 0; j < n; ++j) {
      const Index aj = arch_of[static_cast<std::size_t>(j)];
      double v = 0.0;
      for (Index c = 0; c < r; ++c) {
        const ObjectId ac = m.archetypes[c];
        if (j == i) {
          v += m.weights(i, c) * m.x(ac, ac);
        } else if (aj == c) {
          v += m.weights(i, c) * m.x(ac, i);
        } else {
          v += m.weights(i, c) * m.x(ac, j);
        }
      }
      m.x(i, j) = v;
    }
  }
  return m;
}

inline dds::PartialState state_with(const DenseMatrix& x, const std::vector<ObjectId>& rows) {
  dds::PartialState s(x.rows());
  for (ObjectId i : rows) s.insert_row(i, {x.row(i).data(), static_cast<std::size_t>(x.cols())});
  return s;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace ddtest
