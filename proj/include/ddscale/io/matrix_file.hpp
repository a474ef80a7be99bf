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

// MatrixFile: binary ("DDSM") and CSV containers for dense matrices.
//
// Binary layout, all integers and floats little-endian:
//   char[4]  magic "DDSM"
//   u32      version (1)
//   u64      rows
//   u64      cols
//   u32      metadata length in bytes, then that many bytes of UTF-8 text
//   f64      rows * cols values, row-major

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ddscale/common.hpp"

namespace dds::io {

inline constexpr char kMagic[4] = {'D', 'D', 'S', 'M'};
inline constexpr std::uint32_t kVersion = 1;

struct MatrixFile {
  DenseMatrix matrix;
  /// Free-form key=value lines (e.g. the similarity transform applied).
  std::string metadata;
};

enum class MatrixFormat { Binary, Csv };

/// Picks CSV for a ".csv" suffix, binary otherwise.
inline MatrixFormat format_for(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0 ? MatrixFormat::Csv : MatrixFormat::Binary;
}

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw InvalidInput("MatrixFile: truncated file");
  unsigned char b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InvalidInput("cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InvalidInput("write failed: " + path);
}

}  // namespace detail

inline std::string encode_binary(const MatrixFile& m) {
  std::string out;
  out.reserve(32 + m.metadata.size() + static_cast<std::size_t>(m.matrix.size()) * 8);
  out.append(kMagic, 4);
  detail::put_le<std::uint32_t>(out, kVersion);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.matrix.rows()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.matrix.cols()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.metadata.size()));
  out += m.metadata;
  for (Index i = 0; i < m.matrix.rows(); ++i)
    for (Index j = 0; j < m.matrix.cols(); ++j) detail::put_le<double>(out, m.matrix(i, j));
  return out;
}

inline MatrixFile decode_binary(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw InvalidInput("MatrixFile: bad magic");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw InvalidInput("MatrixFile: unsupported version " + std::to_string(version));
  const auto rows = detail::get_le<std::uint64_t>(bytes, pos);
  const auto cols = detail::get_le<std::uint64_t>(bytes, pos);
  const auto meta = detail::get_le<std::uint32_t>(bytes, pos);
  if (pos + meta > bytes.size()) throw InvalidInput("MatrixFile: truncated metadata");
  MatrixFile m;
  m.metadata = bytes.substr(pos, meta);
  pos += meta;
  if (bytes.size() - pos != rows * cols * 8)
    throw InvalidInput("MatrixFile: payload is " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                       std::to_string(rows * cols * 8));
  m.matrix.resize(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.matrix.rows(); ++i)
    for (Index j = 0; j < m.matrix.cols(); ++j) m.matrix(i, j) = detail::get_le<double>(bytes, pos);
  if (!m.matrix.allFinite()) throw InvalidInput("MatrixFile: non-finite values");
  return m;
}

/// Metadata lines are written as leading "# " comments, then a header row
/// c0,c1,... and one line per row at 17 significant digits.
inline std::string encode_csv(const MatrixFile& m) {
  std::string out;
  std::istringstream meta(m.metadata);
  for (std::string line; std::getline(meta, line);) out += "# " + line + "\n";
  for (Index j = 0; j < m.matrix.cols(); ++j) out += (j ? ",c" : "c") + std::to_string(j);
  out += "\n";
  char buf[32];
  for (Index i = 0; i < m.matrix.rows(); ++i) {
    for (Index j = 0; j < m.matrix.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.matrix(i, j));
      if (j) out += ',';
      out += buf;
    }
    out += "\n";
  }
  return out;
}

inline MatrixFile decode_csv(const std::string& text) {
  MatrixFile m;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::vector<std::vector<double>> rows;
  Index cols = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# ", 0) == 0) {
      m.metadata += line.substr(2) + "\n";
      continue;
    }
    if (!header) {
      header = true;
      cols = static_cast<Index>(std::count(line.begin(), line.end(), ',') + (line.empty() ? 0 : 1));
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> r;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') throw InvalidInput("MatrixFile CSV: bad number '" + cell + "'");
      r.push_back(v);
    }
    if (static_cast<Index>(r.size()) != cols)
      throw InvalidInput("MatrixFile CSV: row " + std::to_string(rows.size()) + " has " + std::to_string(r.size()) +
                         " values, header has " + std::to_string(cols));
    rows.push_back(std::move(r));
  }
  if (!header) throw InvalidInput("MatrixFile CSV: missing header");
  m.matrix.resize(static_cast<Index>(rows.size()), std::max<Index>(cols, 0));
  for (Index i = 0; i < m.matrix.rows(); ++i)
    for (Index j = 0; j < m.matrix.cols(); ++j) m.matrix(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  if (!m.matrix.allFinite()) throw InvalidInput("MatrixFile CSV: non-finite values");
  return m;
}

inline void write_matrix(const std::string& path, const MatrixFile& m) {
  detail::spit(path, format_for(path) == MatrixFormat::Csv ? encode_csv(m) : encode_binary(m));
}

inline MatrixFile read_matrix(const std::string& path) {
  const std::string bytes = detail::slurp(path);
  return format_for(path) == MatrixFormat::Csv ? decode_csv(bytes) : decode_binary(bytes);
}

}  // namespace dds::io
