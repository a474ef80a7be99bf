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

// Flat dotted key = value configuration with strict key checking.
//
//   # comment
//   choice.strategy = rmse_loss
//   budget.t_max = 50
//
// Command-line overrides use the same form ("key=value") and win over the
// file. Unknown keys are errors.

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ddscale/engine.hpp"
#include "ddscale/io/matrix_file.hpp"
#include "ddscale/io/oracles.hpp"

namespace dds::io {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seed",
      "oracle.kind",
      "oracle.path",
      "oracle.metric",
      "oracle.transform",
      "oracle.command",
      "oracle.element_command",
      "oracle.n",
      "oracle.concurrency_safe",
      "oracle.offset",
      "oracle.element_cost",
      "choice.strategy",
      "choice.p_cap",
      "choice.local_search",
      "choice.k_top",
      "choice.switch_t",
      "choice.switch_strategy",
      "choice.labels",
      "emulator.kind",
      "variance.mode",
      "variance.cv",
      "variance.exclude_first",
      "loss.norm",
      "loss.weight",
      "loss.weight_threshold",
      "loss.cost_coefficient",
      "budget.t_max",
      "budget.cost",
      "benchmark.truth",
      "log.timing",
  };
  return keys;
}

class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "config") {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const std::string where = origin + ":" + std::to_string(lineno);
      auto [k, v] = split(line, where);
      if (c.values_.count(k)) throw ConfigError(where + ": duplicate key '" + k + "'");
      c.values_[k] = v;
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  /// Applies a "key=value" override.
  void set(const std::string& assignment) {
    auto [k, v] = split(assignment, "override '" + assignment + "'");
    values_[k] = v;
  }

  bool has(const std::string& k) const { return values_.count(k) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& k, const std::string& def) const { return has(k) ? values_.at(k) : def; }
  std::optional<std::string> str(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    return values_.at(k);
  }
  std::optional<long long> integer(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    const std::string& v = values_.at(k);
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') throw ConfigError(k + ": expected an integer, got '" + v + "'");
    return x;
  }
  std::optional<double> real(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    const std::string& v = values_.at(k);
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') throw ConfigError(k + ": expected a number, got '" + v + "'");
    return x;
  }
  std::optional<bool> boolean(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    const std::string& v = values_.at(k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(k + ": expected true or false, got '" + v + "'");
  }

  template <class E>
  std::optional<E> choice(const std::string& k, const std::vector<std::pair<std::string, E>>& options) const {
    if (!has(k)) return std::nullopt;
    const std::string& v = values_.at(k);
    std::string names;
    for (const auto& [name, e] : options) {
      if (name == v) return e;
      names += (names.empty() ? "" : ", ") + name;
    }
    throw ConfigError(k + ": '" + v + "' is not one of " + names);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::pair<std::string, std::string> split(const std::string& line, const std::string& where) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string k = trim(line.substr(0, eq));
    std::string v = trim(line.substr(eq + 1));
    if (!known_keys().count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
    return {k, v};
  }

  std::map<std::string, std::string> values_;
};

inline const std::vector<std::pair<std::string, Strategy>> kStrategies{{"rmse_loss", Strategy::RMSE_LOSS},
                                                                       {"furthest", Strategy::FURTHEST},
                                                                       {"random", Strategy::RANDOM},
                                                                       {"prior_label", Strategy::PRIOR_LABEL}};
inline const std::vector<std::pair<std::string, EmulatorKind>> kEmulators{{"nn", EmulatorKind::NN},
                                                                          {"mm", EmulatorKind::MM}};

/// Reads whitespace-separated integer labels, one per object.
inline std::vector<int> read_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open labels file " + path);
  std::vector<int> out;
  for (long long v; f >> v;) out.push_back(static_cast<int>(v));
  if (!f.eof()) throw ConfigError("labels file " + path + ": non-integer entry");
  return out;
}

/// RunConfig from the choice / emulator / variance / loss / budget keys.
/// Budget keys are mutually exclusive; the seed is required.
inline RunConfig run_config(const Config& c) {
  RunConfig r;
  if (c.has("budget.t_max") && c.has("budget.cost"))
    throw ConfigError("budget.t_max and budget.cost are mutually exclusive");
  if (!c.has("budget.t_max") && !c.has("budget.cost")) throw ConfigError("one of budget.t_max or budget.cost is required");
  if (auto v = c.integer("budget.t_max")) r.budget.t_max = *v;
  if (auto v = c.real("budget.cost")) r.budget.cost = *v;
  auto seed = c.integer("seed");
  if (!seed) throw ConfigError("seed is required");
  if (*seed < 0) throw ConfigError("seed must be non-negative");
  r.seed = static_cast<std::uint64_t>(*seed);

  if (auto v = c.choice("choice.strategy", kStrategies)) r.strategy = *v;
  if (auto v = c.integer("choice.p_cap")) r.p_cap = *v;
  if (auto v = c.boolean("choice.local_search")) r.local_search = *v;
  if (auto v = c.integer("choice.k_top")) r.k_top = *v;
  if (auto v = c.integer("choice.switch_t")) r.switch_t = *v;
  if (auto v = c.choice("choice.switch_strategy", kStrategies)) r.switch_strategy = *v;
  if (auto v = c.str("choice.labels")) r.labels = read_labels(*v);
  if (auto v = c.choice("emulator.kind", kEmulators)) r.emulator = *v;
  if (auto v = c.choice<VarianceMode>("variance.mode", {{"full", VarianceMode::FULL}, {"reduced", VarianceMode::REDUCED}}))
    r.variance = *v;
  if (auto v = c.choice<CvPolicy>("variance.cv", {{"obs", CvPolicy::OBS}, {"loo", CvPolicy::LOO}})) r.cv = *v;
  if (auto v = c.integer("variance.exclude_first")) r.exclude_first = *v;
  if (auto v = c.choice<LossNorm>("loss.norm", {{"l1", LossNorm::L1}, {"l2", LossNorm::L2}, {"linf", LossNorm::LInf}}))
    r.loss.norm = *v;
  if (auto v = c.choice<WeightKind>("loss.weight", {{"uniform", WeightKind::Uniform}, {"threshold", WeightKind::Threshold}}))
    r.loss.weight = *v;
  if (auto v = c.real("loss.weight_threshold")) r.loss.weight_threshold = *v;
  if (r.loss.weight == WeightKind::Threshold && !c.has("loss.weight_threshold"))
    throw ConfigError("loss.weight = threshold needs loss.weight_threshold");
  if (auto v = c.real("loss.cost_coefficient")) r.loss.cost_coefficient = *v;
  if (auto v = c.real("oracle.element_cost")) r.loss.element_cost = *v;
  return r;
}

/// Reads a precomputed matrix, applying oracle.transform:
///   none          the file already holds distances
///   similarity    X = max_k S_kk - S
///   neglog_shift  X = -log S - min(-log S)
inline DenseMatrix load_precomputed(const std::string& path, const std::string& transform) {
  MatrixFile m = read_matrix(path);
  if (transform == "none") return to_distance(m.matrix, true);
  if (transform == "similarity") return to_distance(m.matrix);
  if (transform == "neglog_shift") return neglog_shift(m.matrix);
  throw ConfigError("oracle.transform: '" + transform + "' is not one of none, similarity, neglog_shift");
}

/// Builds the oracle described by the oracle.* keys.
inline std::unique_ptr<Oracle> make_oracle(const Config& c) {
  const std::string kind = c.str("oracle.kind", "precomputed");
  const double cost = c.real("oracle.element_cost").value_or(1.0);
  if (!(cost > 0.0)) throw ConfigError("oracle.element_cost must be positive");
  auto need = [&](const std::string& k) {
    auto v = c.str(k);
    if (!v) throw ConfigError(k + " is required for oracle.kind = " + kind);
    return *v;
  };
  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys)
      if (c.has(k)) throw ConfigError(std::string(k) + " does not apply to oracle.kind = " + kind);
  };
  if (kind == "precomputed") {
    forbid({"oracle.metric", "oracle.command", "oracle.element_command", "oracle.n", "oracle.concurrency_safe",
            "oracle.offset"});
    return std::make_unique<MatrixOracle>(load_precomputed(need("oracle.path"), c.str("oracle.transform", "none")), cost);
  }
  if (kind == "features") {
    forbid({"oracle.command", "oracle.element_command", "oracle.n", "oracle.concurrency_safe", "oracle.offset"});
    auto metric = c.choice<FeatureMetric>("oracle.metric", {{"euclidean", FeatureMetric::Euclidean},
                                                           {"one_minus_correlation", FeatureMetric::OneMinusCorrelation}})
                      .value_or(FeatureMetric::Euclidean);
    auto transform = c.choice<SimilarityTransform>("oracle.transform", {{"none", SimilarityTransform::None},
                                                                       {"neglog_shift", SimilarityTransform::NeglogShift}})
                         .value_or(SimilarityTransform::None);
    return std::make_unique<FeatureOracle>(read_matrix(need("oracle.path")).matrix, metric, transform, cost);
  }
  if (kind == "external") {
    forbid({"oracle.path", "oracle.metric"});
    ExternalConfig e;
    e.command = need("oracle.command");
    e.element_command = c.str("oracle.element_command", "");
    auto n = c.integer("oracle.n");
    if (!n) throw ConfigError("oracle.n is required for oracle.kind = external");
    e.n = *n;
    e.element_cost = cost;
    e.concurrency_safe = c.boolean("oracle.concurrency_safe").value_or(false);
    e.transform = c.choice<SimilarityTransform>("oracle.transform", {{"none", SimilarityTransform::None},
                                                                    {"neglog", SimilarityTransform::NeglogShift}})
                      .value_or(SimilarityTransform::None);
    e.offset = c.real("oracle.offset").value_or(0.0);
    return std::make_unique<ExternalOracle>(e);
  }
  throw ConfigError("oracle.kind: '" + kind + "' is not one of precomputed, features, external");
}

}  // namespace dds::io
