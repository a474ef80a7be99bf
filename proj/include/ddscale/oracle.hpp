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

#include <map>
#include <utility>
#include <vector>

#include "ddscale/common.hpp"

namespace dds {

enum class OracleKind { PRECOMPUTED, FEATURES, EXTERNAL };

/// Source of distance-scale matrix entries. Full-row queries must return
/// exactly size() finite values.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleKind kind() const = 0;
  virtual Index size() const = 0;
  virtual std::vector<double> row(ObjectId i) = 0;
  virtual double element(ObjectId i, ObjectId j) = 0;
  /// Cost units charged per element (L).
  virtual double element_cost() const { return 1.0; }
};

/// Fully materialized matrix.
class MatrixOracle final : public Oracle {
 public:
  explicit MatrixOracle(DenseMatrix m, double element_cost = 1.0) : m_(std::move(m)), cost_(element_cost) {
    if (m_.rows() != m_.cols()) throw InvalidInput("MatrixOracle: matrix must be square");
    if (!m_.allFinite()) throw InvalidInput("MatrixOracle: non-finite entries");
  }
  OracleKind kind() const override { return OracleKind::PRECOMPUTED; }
  Index size() const override { return m_.rows(); }
  std::vector<double> row(ObjectId i) override {
    check(i);
    return {m_.row(i).data(), m_.row(i).data() + m_.cols()};
  }
  double element(ObjectId i, ObjectId j) override {
    check(i);
    check(j);
    return m_(i, j);
  }
  double element_cost() const override { return cost_; }
  const DenseMatrix& matrix() const { return m_; }

 private:
  void check(ObjectId i) const {
    if (i < 0 || i >= m_.rows()) throw OracleError("MatrixOracle: index " + std::to_string(i) + " out of range");
  }
  DenseMatrix m_;
  double cost_;
};

/// Counts queries of a wrapped oracle; used to check the never-twice contract.
class CountingOracle final : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner) : inner_(inner) {}
  OracleKind kind() const override { return inner_.kind(); }
  Index size() const override { return inner_.size(); }
  std::vector<double> row(ObjectId i) override {
    ++row_queries[i];
    return inner_.row(i);
  }
  double element(ObjectId i, ObjectId j) override {
    ++element_queries[{i, j}];
    return inner_.element(i, j);
  }
  double element_cost() const override { return inner_.element_cost(); }

  std::map<ObjectId, int> row_queries;
  std::map<std::pair<ObjectId, ObjectId>, int> element_queries;

 private:
  Oracle& inner_;
};

}  // namespace dds
