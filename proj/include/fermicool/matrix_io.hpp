#pragma once

// Dense matrix text format:
//
//   # optional comment lines start with '#'
//   R C
//   a11 a12 ... a1C
//   ...
//   aR1 aR2 ... aRC
//
// Values are whitespace separated decimal or scientific floats, one matrix
// row per line. Blank lines are ignored.

#include "fermicool/matcore.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace fermicool {

/// Parses a matrix from `in`. `source` only labels error messages.
/// Throws ParseError carrying the 1-based line number of the fault.
Matrix parse_dense_matrix(std::istream& in, const std::string& source = "<stream>");

Matrix read_dense_matrix(const std::filesystem::path& path);

/// Writes with 17 significant digits so that reading back is lossless.
void write_dense_matrix(std::ostream& out, const Matrix& m);
void write_dense_matrix(const std::filesystem::path& path, const Matrix& m);

/// "%.17g" formatting shared by the matrix and CSV writers.
std::string format_double(double x);

}  // namespace fermicool
