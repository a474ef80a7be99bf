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

// Choosing which T of M points of a stationary AR(1) series to observe when
// estimating its mean. Indices are 1-based.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ddscale/common.hpp"

namespace dds::ar1 {

struct Ar1Spec {
  double psi = 0.0;
  double phi = 0.9;
  double sigma_eps = 1.0;
  Index m = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(std::abs(phi) < 1.0)) throw InvalidInput("Ar1Spec: |phi| must be < 1");
    if (!(sigma_eps > 0.0)) throw InvalidInput("Ar1Spec: sigma_eps must be positive");
    if (m < 1) throw InvalidInput("Ar1Spec: M must be positive");
  }
  double mean() const { return psi / (1.0 - phi); }
  double marginal_variance() const { return sigma_eps * sigma_eps / (1.0 - phi * phi); }
};

/// S_1 from the stationary marginal, then S_i = psi + phi S_{i-1} + eps_i.
inline std::vector<double> simulate(const Ar1Spec& spec, Rng& rng) {
  spec.validate();
  std::normal_distribution<double> eps(0.0, spec.sigma_eps);
  std::normal_distribution<double> first(spec.mean(), std::sqrt(spec.marginal_variance()));
  std::vector<double> s(static_cast<std::size_t>(spec.m));
  s[0] = first(rng);
  for (std::size_t i = 1; i < s.size(); ++i) s[i] = spec.psi + spec.phi * s[i - 1] + eps(rng);
  return s;
}

inline std::vector<double> simulate(const Ar1Spec& spec) {
  Rng rng = derive_rng(spec.seed);
  return simulate(spec, rng);
}

/// (sigma^2 / T^2) sum_{a,b} phi^|i_a - i_b|.
inline double subset_variance(const std::vector<Index>& indices, const Ar1Spec& spec) {
  spec.validate();
  if (indices.empty()) throw InvalidInput("subset_variance: empty index set");
  std::vector<Index> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidInput("subset_variance: duplicate indices");
  if (sorted.front() < 1 || sorted.back() > spec.m) throw InvalidInput("subset_variance: index outside [1, M]");
  double sum = 0.0;
  for (std::size_t a = 0; a < sorted.size(); ++a) {
    sum += 1.0;
    for (std::size_t b = a + 1; b < sorted.size(); ++b)
      sum += 2.0 * std::pow(spec.phi, static_cast<double>(sorted[b] - sorted[a]));
  }
  const double t = static_cast<double>(sorted.size());
  return spec.marginal_variance() * sum / (t * t);
}

/// Closed-form variance of the mean of all M points.
inline double full_mean_variance(const Ar1Spec& spec) {
  spec.validate();
  const double m = static_cast<double>(spec.m);
  const double p = spec.phi;
  if (p == 0.0) return spec.marginal_variance() / m;
  // sum_{k=1}^{M-1} (M - k) p^k
  const double lag = m * p / (1.0 - p) - p * (1.0 - std::pow(p, m)) / ((1.0 - p) * (1.0 - p));
  const double sum = m + 2.0 * lag;
  return spec.marginal_variance() * sum / (m * m);
}

inline std::vector<Index> select_prefix(Index m, Index t) {
  if (t < 1 || t > m) throw InvalidInput("select_prefix: need 1 <= T <= M");
  std::vector<Index> out(static_cast<std::size_t>(t));
  for (Index k = 0; k < t; ++k) out[static_cast<std::size_t>(k)] = k + 1;
  return out;
}

/// 1, 1 + s, 1 + 2s, ... with s = floor(M / T).
inline std::vector<Index> select_thinning(Index m, Index t) {
  if (t < 1 || t > m) throw InvalidInput("select_thinning: need 1 <= T <= M");
  const Index step = m / t;
  std::vector<Index> out(static_cast<std::size_t>(t));
  for (Index k = 0; k < t; ++k) out[static_cast<std::size_t>(k)] = 1 + k * step;
  return out;
}

/// 1, M, then the index with the largest minimum gap to those chosen.
inline std::vector<Index> select_greedy(Index m, Index steps) {
  if (steps < 1 || steps > m) throw InvalidInput("select_greedy: need 1 <= steps <= M");
  std::vector<Index> out{1};
  if (steps == 1) return out;
  std::vector<Index> gap(static_cast<std::size_t>(m + 1), std::numeric_limits<Index>::max());
  auto take = [&](Index c) {
    for (Index k = 1; k <= m; ++k) gap[static_cast<std::size_t>(k)] = std::min(gap[static_cast<std::size_t>(k)], std::abs(k - c));
  };
  take(1);
  while (static_cast<Index>(out.size()) < steps) {
    Index best = -1;
    Index best_gap = -1;
    for (Index k = 1; k <= m; ++k) {
      if (gap[static_cast<std::size_t>(k)] > best_gap) {
        best_gap = gap[static_cast<std::size_t>(k)];
        best = k;
      }
    }
    out.push_back(best);
    take(best);
  }
  return out;
}

inline double binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Exhaustive minimum of subset_variance over all T-subsets; first in
/// lexicographic order wins ties.
inline std::vector<Index> brute_force_best(Index m, Index t, const Ar1Spec& spec) {
  if (t < 1 || t > m) throw InvalidInput("brute_force_best: need 1 <= T <= M");
  if (binomial(m, t) > 1e6) throw InvalidInput("brute_force_best: more than 1e6 subsets");
  Ar1Spec local = spec;
  local.m = m;
  std::vector<Index> cur(static_cast<std::size_t>(t));
  for (Index k = 0; k < t; ++k) cur[static_cast<std::size_t>(k)] = k + 1;
  std::vector<Index> best = cur;
  double best_v = subset_variance(cur, local);
  while (true) {
    Index k = t - 1;
    while (k >= 0 && cur[static_cast<std::size_t>(k)] == m - t + k + 1) --k;
    if (k < 0) break;
    ++cur[static_cast<std::size_t>(k)];
    for (Index r = k + 1; r < t; ++r) cur[static_cast<std::size_t>(r)] = cur[static_cast<std::size_t>(r - 1)] + 1;
    double v = subset_variance(cur, local);
    if (v < best_v) {
      best_v = v;
      best = cur;
    }
  }
  return best;
}

/// Empirical variance of the subset mean over `reps` simulated series.
inline double monte_carlo_variance(const std::vector<Index>& indices, const Ar1Spec& spec, Index reps) {
  if (reps < 2) throw InvalidInput("monte_carlo_variance: need at least 2 replicates");
  std::vector<double> means(static_cast<std::size_t>(reps));
  for (Index r = 0; r < reps; ++r) {
    Rng rng = derive_rng(spec.seed, static_cast<std::uint64_t>(r));
    auto s = simulate(spec, rng);
    double sum = 0.0;
    for (Index i : indices) sum += s[static_cast<std::size_t>(i - 1)];
    means[static_cast<std::size_t>(r)] = sum / static_cast<double>(indices.size());
  }
  double mu = 0.0;
  for (double v : means) mu += v;
  mu /= static_cast<double>(reps);
  double ss = 0.0;
  for (double v : means) ss += (v - mu) * (v - mu);
  return ss / static_cast<double>(reps - 1);
}

}  // namespace dds::ar1
