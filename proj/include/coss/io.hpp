#pragma once

// Plain-text matrix files: UTF-8, comma separated, one row per line, no
// header, 17 significant digits.

#include "coss/linalg.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace coss::io {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view text, const std::string& where) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError(where + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return v;
}

inline void write_matrix(std::ostream& os, const Eigen::Ref<const Matrix>& m) {
  std::string line;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    os << line;
  }
}

inline void write_matrix(const std::filesystem::path& path, const Eigen::Ref<const Matrix>& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open '" + path.string() + "' for writing");
  write_matrix(os, m);
  if (!os) throw ValidationError("failed writing '" + path.string() + "'");
}

inline Matrix read_matrix(std::istream& is, const std::string& name) {
  std::vector<double> values;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    Eigen::Index count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      const std::string_view cell =
          body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      values.push_back(parse_double(cell, name + ":" + std::to_string(line_no)));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols < 0) cols = count;
    if (count != cols) {
      throw ValidationError(name + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw ValidationError(name + ": matrix file is empty");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  return out;
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open matrix file '" + path.string() + "'");
  return read_matrix(is, path.string());
}

/// Accepts a single row or a single column.
inline Vector read_vector(const std::filesystem::path& path) {
  const Matrix m = read_matrix(path);
  if (m.rows() != 1 && m.cols() != 1) {
    throw ValidationError("'" + path.string() + "' must hold a single row or column");
  }
  return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace coss::io
