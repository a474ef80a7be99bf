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

#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "ddscale/common.hpp"

namespace dds {

using ElementKey = std::pair<ObjectId, ObjectId>;

/// What has been learned so far: the evaluated objects in evaluation order,
/// their full observed rows (distance scale), individually evaluated
/// elements, and the compute spent.
class PartialState {
 public:
  PartialState() = default;
  explicit PartialState(Index n) : n_(n), position_(static_cast<std::size_t>(n), -1) {
    if (n < 1) throw InvalidInput("PartialState: need at least one object");
  }

  Index size() const { return n_; }
  Index t() const { return static_cast<Index>(evaluated_.size()); }
  std::span<const ObjectId> evaluated() const { return evaluated_; }

  bool is_evaluated(ObjectId i) const { return position_.at(static_cast<std::size_t>(i)) >= 0; }
  /// Position of i in evaluation order, or -1.
  Index position(ObjectId i) const { return position_.at(static_cast<std::size_t>(i)); }

  std::span<const double> row_at(Index pos) const {
    return {rows_.data() + pos * n_, static_cast<std::size_t>(n_)};
  }
  std::span<const double> row_of(ObjectId i) const {
    Index p = position(i);
    if (p < 0) throw InvalidInput("row_of: object " + std::to_string(i) + " is not evaluated");
    return row_at(p);
  }
  /// X(Omega[pos], j).
  double at(Index pos, ObjectId j) const { return rows_[static_cast<std::size_t>(pos * n_ + j)]; }

  void insert_row(ObjectId i, std::span<const double> row) {
    check_id(i);
    if (is_evaluated(i)) throw InvalidInput("insert_row: object " + std::to_string(i) + " already evaluated");
    if (static_cast<Index>(row.size()) != n_) throw InvalidInput("insert_row: row length must equal N");
    if (!all_finite(row)) throw InvalidInput("insert_row: non-finite value in row");
    position_[static_cast<std::size_t>(i)] = t();
    evaluated_.push_back(i);
    rows_.insert(rows_.end(), row.begin(), row.end());
    // Elements of a now fully observed row are subsumed by it.
    auto it = local_.lower_bound({i, std::numeric_limits<ObjectId>::min()});
    while (it != local_.end() && it->first.first == i) it = local_.erase(it);
  }

  void add_local(ObjectId i, ObjectId j, double value) {
    check_id(i);
    check_id(j);
    if (is_evaluated(i)) throw InvalidInput("add_local: element lies in an evaluated row");
    if (!std::isfinite(value)) throw InvalidInput("add_local: non-finite value");
    local_[{i, j}] = value;
    ++local_evaluations_;
  }

  const std::map<ElementKey, double>& local_elements() const { return local_; }
  /// Count of element-level evaluations ever performed (including those
  /// later subsumed by a full row).
  Index local_evaluations() const { return local_evaluations_; }
  void set_local_evaluations(Index n) { local_evaluations_ = n; }

  double spent_cost() const { return spent_cost_; }
  void add_cost(double c) { spent_cost_ += c; }
  void set_spent_cost(double c) { spent_cost_ = c; }

  std::vector<ObjectId> unevaluated() const {
    std::vector<ObjectId> out;
    out.reserve(static_cast<std::size_t>(n_ - t()));
    for (ObjectId i = 0; i < n_; ++i) {
      if (position_[static_cast<std::size_t>(i)] < 0) out.push_back(i);
    }
    return out;
  }

 private:
  void check_id(ObjectId i) const {
    if (i < 0 || i >= n_) throw InvalidInput("object id " + std::to_string(i) + " out of range");
  }

  Index n_ = 0;
  std::vector<ObjectId> evaluated_;
  std::vector<Index> position_;
  std::vector<double> rows_;
  std::map<ElementKey, double> local_;
  Index local_evaluations_ = 0;
  double spent_cost_ = 0.0;
};

}  // namespace dds
