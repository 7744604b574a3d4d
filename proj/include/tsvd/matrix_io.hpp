#pragma once

#include <string>

#include "tsvd/core.hpp"

namespace tsvd {

/// Headerless CSV, one matrix row per line, values parsed as 64-bit doubles.
Matrix read_matrix(const std::string& path);

/// Writes with 17 significant digits so read_matrix(write_matrix(M)) == M.
void write_matrix(const std::string& path, const Matrix& M);

std::string format_matrix_csv(const Matrix& M);
Matrix parse_matrix_csv(const std::string& text);

}  // namespace tsvd
