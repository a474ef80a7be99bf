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

// Oracle adapters for feature files and external commands.

#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddscale/io/transform.hpp"
#include "ddscale/oracle.hpp"

namespace dds::io {

enum class FeatureMetric { Euclidean, OneMinusCorrelation };
enum class SimilarityTransform { None, NeglogShift };

inline const char* to_string(FeatureMetric m) {
  return m == FeatureMetric::Euclidean ? "euclidean" : "one_minus_correlation";
}
inline const char* to_string(SimilarityTransform t) { return t == SimilarityTransform::None ? "none" : "neglog_shift"; }

/// Distances computed on demand from an N x L feature matrix.
///   euclidean:              ||f_i - f_j|| / sqrt(L)
///   one_minus_correlation:  1 - pearson(f_i, f_j)
/// neglog_shift applies to the correlation itself (a similarity) and needs
/// the global minimum, so the whole matrix is materialized up front.
class FeatureOracle final : public Oracle {
 public:
  FeatureOracle(DenseMatrix features, FeatureMetric metric, SimilarityTransform transform, double element_cost = 1.0)
      : f_(std::move(features)), metric_(metric), transform_(transform), cost_(element_cost) {
    if (f_.rows() < 1 || f_.cols() < 1) throw InvalidInput("FeatureOracle: empty feature matrix");
    if (!f_.allFinite()) throw InvalidInput("FeatureOracle: non-finite features");
    if (metric_ == FeatureMetric::OneMinusCorrelation) {
      if (f_.cols() < 2) throw InvalidInput("FeatureOracle: correlation needs at least two features");
      z_ = f_;
      for (Index i = 0; i < z_.rows(); ++i) {
        z_.row(i).array() -= z_.row(i).mean();
        const double norm = z_.row(i).norm();
        if (norm == 0.0) throw InvalidInput("FeatureOracle: constant feature row " + std::to_string(i));
        z_.row(i) /= norm;
      }
    }
    if (transform_ == SimilarityTransform::NeglogShift) {
      if (metric_ != FeatureMetric::OneMinusCorrelation)
        throw ConfigError("neglog_shift needs a similarity; use metric one_minus_correlation");
      DenseMatrix s = z_ * z_.transpose();
      materialized_ = neglog_shift(s);
    }
  }

  OracleKind kind() const override { return OracleKind::FEATURES; }
  Index size() const override { return f_.rows(); }
  double element_cost() const override { return cost_; }

  std::vector<double> row(ObjectId i) override {
    check(i);
    std::vector<double> out(static_cast<std::size_t>(size()));
    for (ObjectId j = 0; j < size(); ++j) out[static_cast<std::size_t>(j)] = value(i, j);
    return out;
  }
  double element(ObjectId i, ObjectId j) override {
    check(i);
    check(j);
    return value(i, j);
  }

 private:
  double value(ObjectId i, ObjectId j) const {
    if (materialized_.size()) return materialized_(i, j);
    if (metric_ == FeatureMetric::Euclidean) {
      if (i == j) return 0.0;
      return std::sqrt((f_.row(i) - f_.row(j)).squaredNorm() / static_cast<double>(f_.cols()));
    }
    if (i == j) return 0.0;
    return 1.0 - z_.row(i).dot(z_.row(j));
  }
  void check(ObjectId i) const {
    if (i < 0 || i >= size()) throw OracleError("FeatureOracle: index " + std::to_string(i) + " out of range");
  }

  DenseMatrix f_;
  DenseMatrix z_;
  DenseMatrix materialized_;
  FeatureMetric metric_;
  SimilarityTransform transform_;
  double cost_;
};

struct ExternalConfig {
  /// Shell command; "{i}" is replaced by the 0-based object id.
  std::string command;
  /// Optional single-element command with "{i}" and "{j}".
  std::string element_command;
  Index n = 0;
  double element_cost = 1.0;
  /// When false, calls are serialized behind a mutex.
  bool concurrency_safe = false;
  /// none: output is already a distance. neglog: X = -log(S) + offset per
  /// value (the global minimum is unknown until every row is seen).
  SimilarityTransform transform = SimilarityTransform::None;
  double offset = 0.0;
};

struct CommandResult {
  int exit_code = 0;
  std::string out;
  std::string err;
  double seconds = 0.0;
};

inline std::string substitute(std::string tmpl, const std::string& key, const std::string& value) {
  for (std::size_t pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size()))
    tmpl.replace(pos, key.size(), value);
  return tmpl;
}

/// Runs `cmd` through the shell, capturing stdout and stderr separately.
inline CommandResult run_command(const std::string& cmd) {
  char path[] = "/tmp/ddscale-stderr-XXXXXX";
  const int fd = mkstemp(path);
  if (fd < 0) throw OracleError("cannot create a temporary file for command diagnostics");
  close(fd);
  CommandResult r;
  const auto t0 = std::chrono::steady_clock::now();
  FILE* p = popen(("( " + cmd + "\n) 2>" + path).c_str(), "r");
  if (!p) {
    std::remove(path);
    throw OracleError("cannot spawn: " + cmd);
  }
  char buf[4096];
  for (std::size_t k; (k = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, k);
  const int status = pclose(p);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream ef(path);
  std::ostringstream es;
  es << ef.rdbuf();
  r.err = es.str();
  std::remove(path);
  return r;
}

/// Whitespace- or comma-separated numbers.
inline std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw OracleError("malformed number '" + tok + "'");
    out.push_back(v);
    tok.clear();
  };
  for (char c : text) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      tok += c;
    }
  }
  flush();
  return out;
}

class ExternalOracle final : public Oracle {
 public:
  explicit ExternalOracle(ExternalConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.n < 1) throw ConfigError("external oracle: oracle.n must be positive");
    if (cfg_.command.find("{i}") == std::string::npos) throw ConfigError("external oracle: command needs an {i} placeholder");
    if (!cfg_.element_command.empty() && (cfg_.element_command.find("{i}") == std::string::npos ||
                                          cfg_.element_command.find("{j}") == std::string::npos))
      throw ConfigError("external oracle: element_command needs {i} and {j} placeholders");
  }

  OracleKind kind() const override { return OracleKind::EXTERNAL; }
  Index size() const override { return cfg_.n; }
  double element_cost() const override { return cfg_.element_cost; }

  std::vector<double> row(ObjectId i) override {
    check(i);
    const std::string cmd = substitute(cfg_.command, "{i}", std::to_string(i));
    auto v = call(cmd);
    if (static_cast<Index>(v.size()) != cfg_.n)
      throw OracleError("external oracle: row " + std::to_string(i) + " returned " + std::to_string(v.size()) +
                        " values, expected " + std::to_string(cfg_.n) + diagnostics());
    for (double& x : v) x = transform(x, i);
    return v;
  }

  double element(ObjectId i, ObjectId j) override {
    check(i);
    check(j);
    if (cfg_.element_command.empty()) return row(i)[static_cast<std::size_t>(j)];
    const std::string cmd =
        substitute(substitute(cfg_.element_command, "{i}", std::to_string(i)), "{j}", std::to_string(j));
    auto v = call(cmd);
    if (v.size() != 1)
      throw OracleError("external oracle: element (" + std::to_string(i) + ", " + std::to_string(j) + ") returned " +
                        std::to_string(v.size()) + " values, expected 1" + diagnostics());
    return transform(v[0], i);
  }

  /// Wall-clock seconds of the most recent command.
  double last_seconds() const { return last_.seconds; }
  const CommandResult& last_result() const { return last_; }

 private:
  std::vector<double> call(const std::string& cmd) {
    std::unique_lock<std::mutex> lock(mu_, std::defer_lock);
    if (!cfg_.concurrency_safe) lock.lock();
    last_ = run_command(cmd);
    if (last_.exit_code != 0)
      throw OracleError("external oracle: '" + cmd + "' exited with status " + std::to_string(last_.exit_code) +
                        diagnostics());
    try {
      return parse_numbers(last_.out);
    } catch (const OracleError& e) {
      throw OracleError(std::string("external oracle: ") + e.what() + diagnostics());
    }
  }

  double transform(double x, ObjectId i) const {
    if (cfg_.transform == SimilarityTransform::None) return x;
    if (!(x > 0.0)) throw OracleError("external oracle: non-positive similarity in row " + std::to_string(i));
    return -std::log(x) + cfg_.offset;
  }

  std::string diagnostics() const { return last_.err.empty() ? "" : "; stderr: " + last_.err; }

  void check(ObjectId i) const {
    if (i < 0 || i >= cfg_.n) throw OracleError("external oracle: index " + std::to_string(i) + " out of range");
  }

  ExternalConfig cfg_;
  std::mutex mu_;
  CommandResult last_;
};

}  // namespace dds::io
