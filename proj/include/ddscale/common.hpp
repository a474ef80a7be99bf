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

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dds {

using Index = std::ptrdiff_t;
using ObjectId = int;

/// Row-major dense matrix. Row-major matches the on-disk layout of
/// MatrixFile and makes row slices contiguous.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments: dimension mismatch, non-finite values, out-of-range ids.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// An operation needed at least one evaluated object.
class EmptyState : public Error {
 public:
  using Error::Error;
};

/// The similarity oracle failed or returned malformed data.
class OracleError : public Error {
 public:
  using Error::Error;
};

/// Configuration file or command-line override problems.
class ConfigError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derives an independent generator from a base seed and a stream path.
/// The same (seed, stream...) always produces the same generator.
template <class... Ints>
Rng derive_rng(std::uint64_t seed, Ints... stream) {
  std::uint64_t h = detail::splitmix64(seed);
  ((h = detail::splitmix64(h ^ static_cast<std::uint64_t>(stream))), ...);
  return Rng(h);
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline bool all_finite(const Eigen::Ref<const DenseMatrix>& m) {
  return m.allFinite();
}

}  // namespace dds
