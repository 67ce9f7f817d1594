#include "fermicool/matrix_io.hpp"

#include "fermicool/errors.hpp"

#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace fermicool {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_skippable(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& msg) {
  std::ostringstream os;
  os << source << ":" << line << ": " << msg;
  throw ParseError(os.str(), line);
}

double parse_double(std::string_view tok, const std::string& source, int line) {
  // from_chars rejects a leading '+', which scientific exports sometimes emit.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    fail(source, line, "non-numeric token '" + std::string(tok) + "'");
  if (!std::isfinite(v)) fail(source, line, "non-finite value '" + std::string(tok) + "'");
  return v;
}

long parse_extent(std::string_view tok, const std::string& source, int line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v <= 0)
    fail(source, line, "header extent '" + std::string(tok) + "' is not a positive integer");
  return v;
}

}  // namespace

Matrix parse_dense_matrix(std::istream& in, const std::string& source) {
  std::string line;
  int lineno = 0;
  long rows = 0;
  long cols = 0;
  bool have_header = false;
  Matrix m;
  long row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_skippable(line)) continue;
    const auto toks = split_ws(line);
    if (!have_header) {
      if (toks.size() != 2) fail(source, lineno, "malformed header, expected 'ROWS COLS'");
      rows = parse_extent(toks[0], source, lineno);
      cols = parse_extent(toks[1], source, lineno);
      m.resize(rows, cols);
      have_header = true;
      continue;
    }
    if (row >= rows) fail(source, lineno, "more data rows than the header declares");
    if (static_cast<long>(toks.size()) != cols) {
      std::ostringstream os;
      os << "expected " << cols << " values, found " << toks.size();
      fail(source, lineno, os.str());
    }
    for (long c = 0; c < cols; ++c) m(row, c) = parse_double(toks[c], source, lineno);
    ++row;
  }
  // Truncation is reported at the line where more input was expected.
  if (!have_header) fail(source, lineno + 1, "missing 'ROWS COLS' header");
  if (row != rows) {
    std::ostringstream os;
    os << "header declares " << rows << " rows, found " << row;
    fail(source, lineno + 1, os.str());
  }
  return m;
}

Matrix read_dense_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open matrix file " + path.string());
  return parse_dense_matrix(in, path.string());
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_dense_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_dense_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write matrix file " + path.string());
  write_dense_matrix(out, m);
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace fermicool
