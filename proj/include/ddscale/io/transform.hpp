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

// Similarity to distance conversions applied at ingestion.

#include <string>

#include "ddscale/common.hpp"

namespace dds::io {

/// X = max_k S_kk - S. When every S_kk is equal this is S_0 - S with a zero
/// diagonal; otherwise some self-distances stay positive. With
/// `already_distance` the input is returned unchanged.
inline DenseMatrix to_distance(const DenseMatrix& s, bool already_distance = false) {
  if (s.rows() != s.cols()) throw InvalidInput("to_distance: matrix must be square");
  if (!s.allFinite()) throw InvalidInput("to_distance: non-finite entries");
  if (already_distance || s.rows() == 0) return s;
  const double top = s.diagonal().maxCoeff();
  DenseMatrix x = (-s.array() + top).matrix();
  return x;
}

/// True when all diagonal entries are equal.
inline bool is_metric_similarity(const DenseMatrix& s) {
  return s.rows() == 0 || (s.diagonal().array() == s(0, 0)).all();
}

/// Y = -log S, then X = Y - min Y so the smallest entry is zero.
inline DenseMatrix neglog_shift(const DenseMatrix& s) {
  if (s.size() == 0) return s;
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j = 0; j < s.cols(); ++j) {
      if (!(s(i, j) > 0.0) || !std::isfinite(s(i, j)))
        throw InvalidInput("neglog_shift: entry (" + std::to_string(i) + ", " + std::to_string(j) +
                           ") is not strictly positive and finite");
    }
  }
  DenseMatrix y = (-s.array().log()).matrix();
  y.array() -= y.minCoeff();
  return y;
}

}  // namespace dds::io
