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

// Simulated benchmark data: Gaussian features whose sample correlation has
// a two-level cluster tree (clusters, close pairs, distant groups), with
// beta-distributed outlier weights, across an 11-step difficulty scale.

#include <algorithm>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "ddscale/common.hpp"

namespace dds::sim {

struct SimParams {
  double c0 = 0.75;  // within cluster
  double c1 = 0.5;   // close clusters
  double c2 = 0.25;  // distant clusters (same group)
  double a_h = 0.0;  // inverse outlier alpha
  double b_h = 0.0;  // inverse outlier beta
};

inline constexpr SimParams kClustered{0.75, 0.5, 0.25, 0.0, 0.0};
inline constexpr SimParams kCorrupted{0.3, 0.25, 0.15, 0.2, 5.0};
inline constexpr int kDifficultyLevels = 11;

/// Linear interpolation: d = 1 is clustered, d = 11 corrupted.
inline SimParams interpolate_params(int d) {
  if (d < 1 || d > kDifficultyLevels) throw InvalidInput("difficulty must be in 1..11, got " + std::to_string(d));
  const double f = static_cast<double>(d - 1) / static_cast<double>(kDifficultyLevels - 1);
  auto lerp = [f](double a, double b) { return a + f * (b - a); };
  return {lerp(kClustered.c0, kCorrupted.c0), lerp(kClustered.c1, kCorrupted.c1), lerp(kClustered.c2, kCorrupted.c2),
          lerp(kClustered.a_h, kCorrupted.a_h), lerp(kClustered.b_h, kCorrupted.b_h)};
}

struct SimSpec {
  Index n = 500;
  Index features = 1000;
  Index clusters = 10;
  int difficulty = 1;
  SimParams params = kClustered;
  std::uint64_t seed = 0;

  static SimSpec from_difficulty(int d, std::uint64_t seed, Index n = 500, Index features = 1000, Index clusters = 10) {
    SimSpec s;
    s.n = n;
    s.features = features;
    s.clusters = clusters;
    s.difficulty = d;
    s.params = interpolate_params(d);
    s.seed = seed;
    s.validate();
    return s;
  }

  void validate() const {
    if (n < 1 || features < 1 || clusters < 1) throw InvalidInput("SimSpec: sizes must be positive");
    if (n % clusters != 0) throw InvalidInput("SimSpec: N must be divisible by the number of clusters");
    const auto& p = params;
    if (!(1.0 >= p.c0 && p.c0 >= p.c1 && p.c1 >= p.c2 && p.c2 >= 0.0))
      throw InvalidInput("SimSpec: need 1 >= c0 >= c1 >= c2 >= 0");
    if (p.a_h < 0.0 || p.b_h < 0.0) throw InvalidInput("SimSpec: outlier parameters must be non-negative");
  }

  Index cluster_size() const { return n / clusters; }
};

/// Contiguous, evenly sized clusters.
inline std::vector<int> cluster_labels(const SimSpec& spec) {
  std::vector<int> out(static_cast<std::size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(i / spec.cluster_size());
  return out;
}

enum class ClusterRelation { Same, Close, Distant, Unrelated };

/// Close pairs are (0,1), (2,3), ...; distant groups are complete runs of
/// four clusters (0-3, 4-7, ...). A trailing partial run forms no group.
inline ClusterRelation relation(int a, int b, Index clusters) {
  if (a == b) return ClusterRelation::Same;
  if (a / 2 == b / 2) return ClusterRelation::Close;
  const Index full_groups = clusters / 4;
  if (a / 4 == b / 4 && a / 4 < full_groups) return ClusterRelation::Distant;
  return ClusterRelation::Unrelated;
}

/// Block correlation before outliers.
inline DenseMatrix base_correlation(const SimSpec& spec) {
  const auto labels = cluster_labels(spec);
  const auto& p = spec.params;
  DenseMatrix c(spec.n, spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < spec.n; ++j) {
      if (i == j) {
        c(i, j) = 1.0;
        continue;
      }
      switch (relation(labels[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(j)], spec.clusters)) {
        case ClusterRelation::Same: c(i, j) = p.c0; break;
        case ClusterRelation::Close: c(i, j) = p.c1; break;
        case ClusterRelation::Distant: c(i, j) = p.c2; break;
        case ClusterRelation::Unrelated: c(i, j) = 0.0; break;
      }
    }
  }
  return c;
}

/// w_i ~ Beta(1/a_h, 1/b_h), or all ones when a_h = b_h = 0.
inline Vector outlier_weights(const SimSpec& spec, Rng& rng) {
  Vector w = Vector::Ones(spec.n);
  const auto& p = spec.params;
  if (p.a_h == 0.0 && p.b_h == 0.0) return w;
  if (p.a_h <= 0.0 || p.b_h <= 0.0) throw InvalidInput("outlier_weights: a_h and b_h must both be zero or both positive");
  std::gamma_distribution<double> ga(1.0 / p.a_h, 1.0);
  std::gamma_distribution<double> gb(1.0 / p.b_h, 1.0);
  for (Index i = 0; i < spec.n; ++i) {
    double x = ga(rng);
    double y = gb(rng);
    double v = x / (x + y);
    // Beta(5, 0.2) draws can round to exactly 1 or, rarely, underflow.
    w[i] = std::clamp(v, std::numeric_limits<double>::min(), 1.0);
  }
  return w;
}

/// Mixes each row and column with the self direction: off-diagonal (i, j)
/// is scaled by w_i w_j and the diagonal stays 1.
inline void apply_outliers(DenseMatrix& c, const Vector& w) {
  for (Index i = 0; i < c.rows(); ++i) {
    for (Index j = 0; j < c.cols(); ++j) {
      if (i != j) c(i, j) *= w[i] * w[j];
    }
  }
}

/// Clips negative eigenvalues to zero and rescales back to unit diagonal.
/// Returns the smallest eigenvalue seen before clipping.
inline double psd_repair(DenseMatrix& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  if (es.info() != Eigen::Success) throw Error("psd_repair: eigen-decomposition failed");
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig >= 0.0) return min_eig;
  Vector lam = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd r = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  Vector d = r.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  c = d.asDiagonal() * r * d.asDiagonal();
  c = 0.5 * (c + c.transpose()).eval();
  c.diagonal().setOnes();
  return min_eig;
}

inline DenseMatrix build_correlation(const SimSpec& spec, const Vector& weights) {
  DenseMatrix c = base_correlation(spec);
  apply_outliers(c, weights);
  psd_repair(c);
  return c;
}

/// N x L matrix whose columns are i.i.d. N(0, corr). Column k draws from
/// its own derived stream, so the result is the same for any worker count.
inline DenseMatrix sample_features(const SimSpec& spec, const DenseMatrix& corr, unsigned workers = 1) {
  const Index n = corr.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  DenseMatrix work = corr;
  for (int attempt = 0;; ++attempt) {
    es.compute(work);
    if (es.info() == Eigen::Success) break;
    if (attempt > 0) throw Error("sample_features: correlation factorization failed");
    psd_repair(work);
  }
  const Eigen::MatrixXd factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  Eigen::MatrixXd z(n, spec.features);
  auto fill = [&](Index begin, Index end) {
    for (Index col = begin; col < end; ++col) {
      Rng rng = derive_rng(spec.seed, 2u, static_cast<std::uint64_t>(col));
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index i = 0; i < n; ++i) z(i, col) = normal(rng);
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1) {
    fill(0, spec.features);
  } else {
    std::vector<std::thread> pool;
    const Index chunk = (spec.features + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const Index b = std::min<Index>(spec.features, w * chunk);
      const Index e = std::min<Index>(spec.features, b + chunk);
      pool.emplace_back(fill, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return factor * z;
}

/// X_ij = ||f_i - f_j||_2 / sqrt(L); symmetric with exact zero diagonal.
inline DenseMatrix distance_matrix(const DenseMatrix& features) {
  const Index n = features.rows();
  const double l = static_cast<double>(features.cols());
  DenseMatrix x(n, n);
  for (Index i = 0; i < n; ++i) {
    x(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) {
      x(i, j) = x(j, i) = std::sqrt((features.row(i) - features.row(j)).squaredNorm() / l);
    }
  }
  return x;
}

struct SimDataset {
  SimSpec spec;
  std::vector<int> labels;
  Vector weights;
  DenseMatrix correlation;
  DenseMatrix features;
  DenseMatrix distances;
};

inline SimDataset simulate(const SimSpec& spec, unsigned workers = 1) {
  spec.validate();
  SimDataset d;
  d.spec = spec;
  d.labels = cluster_labels(spec);
  Rng wrng = derive_rng(spec.seed, 1u);
  d.weights = outlier_weights(spec, wrng);
  d.correlation = build_correlation(spec, d.weights);
  d.features = sample_features(spec, d.correlation, workers);
  d.distances = distance_matrix(d.features);
  return d;
}

}  // namespace dds::sim
