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

// RunLog CSV: one line per engine step with a fixed column order.

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ddscale/engine.hpp"

namespace dds::io {

inline const std::vector<std::string>& runlog_columns() {
  static const std::vector<std::string> cols{
      "iteration", "t",           "action",       "i",          "j",              "rmse",
      "delta_pred", "delta_obs",  "delta_error",  "cumulative_cost", "gamma_fallback", "true_rmse",
      "decision_seconds", "evaluation_seconds", "assessment_seconds"};
  return cols;
}

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : "NA"; }

class RunLogWriter {
 public:
  /// With `timing` off the two timing columns hold NA so that logs from
  /// identical runs compare byte for byte.
  RunLogWriter(std::ostream& out, bool timing) : out_(out), timing_(timing) {
    const auto& cols = runlog_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out_ << (k ? "," : "") << cols[k];
    out_ << "\n";
  }

  void write(const RunRecord& r) {
    out_ << r.iteration << ',' << r.t << ',' << to_string(r.action) << ',' << r.i << ',' << r.j << ','
         << fmt_opt(r.rmse) << ',' << fmt_opt(r.delta_pred) << ',' << fmt_opt(r.delta_obs) << ','
         << fmt_opt(r.delta_error) << ',' << fmt_num(r.cumulative_cost) << ',' << (r.gamma_fallback ? 1 : 0) << ','
         << fmt_opt(r.true_rmse) << ',' << (timing_ ? fmt_num(r.decision_seconds) : "NA") << ','
         << (timing_ ? fmt_num(r.evaluation_seconds) : "NA") << ','
         << (timing_ ? fmt_num(r.assessment_seconds) : "NA") << "\n";
    out_.flush();
  }

 private:
  std::ostream& out_;
  bool timing_;
};

}  // namespace dds::io
