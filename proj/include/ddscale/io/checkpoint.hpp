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

// Checkpoint = "<prefix>.ddsm" holding the observed rows (t x N, in
// evaluation order) + "<prefix>.json" with everything else needed to
// resume or complete a run.

#include <fstream>
#include <string>

#include <json.hpp>

#include "ddscale/engine.hpp"
#include "ddscale/io/matrix_file.hpp"

namespace dds::io {

struct Checkpoint {
  PartialState state;
  CvHistory history;
  GammaCoefficients gamma;
  EmulatorKind emulator = EmulatorKind::MM;
  Index iteration = 0;
  std::string rng_state;
};

namespace detail {

inline nlohmann::json features_json(const VarianceFeatures& f) {
  return {{"t", f.t}, {"epsilon", f.epsilon}, {"r1", f.r1}, {"r2", f.r2}, {"r_inf", f.r_inf}};
}

inline VarianceFeatures features_from(const nlohmann::json& j) {
  VarianceFeatures f;
  f.t = j.at("t").get<double>();
  f.epsilon = j.at("epsilon").get<double>();
  f.r1 = j.at("r1").get<double>();
  f.r2 = j.at("r2").get<double>();
  f.r_inf = j.at("r_inf").get<double>();
  return f;
}

}  // namespace detail

inline void write_checkpoint(const std::string& prefix, const PartialState& s, const CvHistory& h,
                             const GammaCoefficients& g, EmulatorKind em, Index iteration,
                             const std::string& rng_state = {}) {
  MatrixFile rows;
  rows.matrix.resize(s.t(), s.size());
  for (Index p = 0; p < s.t(); ++p)
    for (ObjectId j = 0; j < s.size(); ++j) rows.matrix(p, j) = s.at(p, j);
  rows.metadata = "content=observed_rows\n";
  write_matrix(prefix + ".ddsm", rows);

  nlohmann::json j;
  j["format"] = "ddscale-checkpoint";
  j["version"] = 1;
  j["n"] = s.size();
  j["evaluated"] = std::vector<ObjectId>(s.evaluated().begin(), s.evaluated().end());
  auto& loc = j["local_elements"] = nlohmann::json::array();
  for (const auto& [key, v] : s.local_elements()) loc.push_back({key.first, key.second, v});
  j["local_evaluations"] = s.local_evaluations();
  j["spent_cost"] = s.spent_cost();
  j["iteration"] = iteration;
  j["emulator"] = to_string(em);
  j["gamma"] = {{"mode", to_string(g.mode)}, {"coef", g.coef}, {"fallback", g.fallback}};
  auto& recs = j["cv_history"] = nlohmann::json::array();
  for (const auto& r : h.records)
    recs.push_back({{"t", r.t}, {"object", r.object}, {"delta_obs", r.delta_obs}, {"features", detail::features_json(r.features)}});
  j["cv_policy"] = to_string(h.policy);
  j["exclude_first"] = h.exclude_first;
  j["rng_state"] = rng_state;

  std::ofstream f(prefix + ".json", std::ios::trunc);
  if (!f) throw InvalidInput("cannot write " + prefix + ".json");
  f << j.dump(1) << "\n";
}

inline void write_checkpoint(const std::string& prefix, const Engine& e) {
  write_checkpoint(prefix, e.state(), e.history(), e.gamma(), e.config().emulator, e.iteration(), e.rng_state());
}

/// Engine positioned exactly where the checkpoint left off.
inline void resume(Engine& e, const Checkpoint& c) {
  if (c.emulator != e.config().emulator) throw ConfigError("resume: emulator kind differs from the checkpoint");
  e.restore(c.state, c.history, c.iteration, c.rng_state);
}

inline Checkpoint read_checkpoint(const std::string& prefix) {
  std::ifstream f(prefix + ".json");
  if (!f) throw InvalidInput("cannot open " + prefix + ".json");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(prefix + ".json: " + e.what());
  }
  try {
    if (j.at("format") != "ddscale-checkpoint" || j.at("version") != 1) throw InvalidInput("not a checkpoint sidecar");
    const Index n = j.at("n").get<Index>();
    MatrixFile rows = read_matrix(prefix + ".ddsm");
    const auto ids = j.at("evaluated").get<std::vector<ObjectId>>();
    if (rows.matrix.rows() != static_cast<Index>(ids.size()) || rows.matrix.cols() != n)
      throw InvalidInput("checkpoint: row file does not match the sidecar");
    Checkpoint c;
    c.state = PartialState(n);
    for (std::size_t p = 0; p < ids.size(); ++p)
      c.state.insert_row(ids[p], {rows.matrix.row(static_cast<Index>(p)).data(), static_cast<std::size_t>(n)});
    for (const auto& e : j.at("local_elements"))
      c.state.add_local(e.at(0).get<ObjectId>(), e.at(1).get<ObjectId>(), e.at(2).get<double>());
    c.state.set_local_evaluations(j.at("local_evaluations").get<Index>());
    c.state.set_spent_cost(j.at("spent_cost").get<double>());
    c.iteration = j.at("iteration").get<Index>();
    c.emulator = j.at("emulator") == "nn" ? EmulatorKind::NN : EmulatorKind::MM;
    const auto& g = j.at("gamma");
    c.gamma.mode = g.at("mode") == "full" ? VarianceMode::FULL : VarianceMode::REDUCED;
    c.gamma.coef = g.at("coef").get<std::array<double, VarianceFeatures::kFull>>();
    c.gamma.fallback = g.at("fallback").get<bool>();
    c.history.policy = j.at("cv_policy") == "loo" ? CvPolicy::LOO : CvPolicy::OBS;
    c.history.exclude_first = j.at("exclude_first").get<Index>();
    for (const auto& r : j.at("cv_history")) {
      CvRecord rec;
      rec.t = r.at("t").get<Index>();
      rec.object = r.at("object").get<ObjectId>();
      rec.delta_obs = r.at("delta_obs").get<double>();
      rec.features = detail::features_from(r.at("features"));
      c.history.records.push_back(rec);
    }
    c.rng_state = j.at("rng_state").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(prefix + ".json: " + e.what());
  }
}

}  // namespace dds::io
