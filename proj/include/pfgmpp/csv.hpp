#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "pfgmpp/types.hpp"

namespace pfgmpp::csv {

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class Writer {
 public:
  explicit Writer(const std::vector<std::string>& header) { row_strings(header); }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double c : cells) s.push_back(format_double(c));
    row_strings(s);
  }

  std::string str() const { return out_.str(); }

  void save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw RuntimeError("cannot write " + path.string());
    f << out_.str();
  }

 private:
  std::ostringstream out_;
};

/// Points (one per column) as rows of N columns x0..x{N-1}.
inline Writer points_csv(const Matrix& points) {
  std::vector<std::string> header;
  for (Eigen::Index k = 0; k < points.rows(); ++k) header.push_back("x" + std::to_string(k));
  Writer w(header);
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    std::vector<double> row(points.col(c).data(), points.col(c).data() + points.rows());
    w.row(row);
  }
  return w;
}

/// Reads an all-numeric CSV. A first row that does not parse as numbers is
/// treated as a header. Errors name the offending row and column (1-based).
inline std::vector<std::vector<double>> read_numeric(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    bool ok = true;
    while (std::getline(ss, cell, ',')) {
      ++col;
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      const std::string t = first == std::string::npos ? "" : cell.substr(first, last - first + 1);
      double v = 0.0;
      const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
      if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        if (rows.empty() && lineno == 1) {
          ok = false;
          break;
        }
        throw ValidationError("csv: " + path.string() + ": row " + std::to_string(lineno) + ", column " +
                              std::to_string(col) + ": not a number ('" + t + "')");
      }
      vals.push_back(v);
    }
    if (!ok) continue;  // header
    if (width == 0) width = vals.size();
    if (vals.size() != width)
      throw ValidationError("csv: " + path.string() + ": row " + std::to_string(lineno) + " has " +
                            std::to_string(vals.size()) + " columns, expected " + std::to_string(width));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ValidationError("csv: " + path.string() + ": no data rows");
  return rows;
}

}  // namespace pfgmpp::csv
