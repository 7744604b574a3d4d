#include "tsvd/matrix_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace tsvd {

std::string format_matrix_csv(const Matrix& M) {
  std::string out;
  char buf[64];
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", M(i, j));
      out += buf;
      out += (j + 1 < M.cols()) ? ',' : '\n';
    }
  }
  return out;
}

Matrix parse_matrix_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      while (end && (*end == ' ' || *end == '\t')) ++end;
      if (end == cell.c_str() || (end && *end != '\0') || errno == ERANGE) {
        throw IoError("parse_matrix_csv: bad cell '" + cell + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("parse_matrix_csv: ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) {
    throw IoError("parse_matrix_csv: empty matrix");
  }
  Matrix M(rows.size(), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return M;
}

Matrix read_matrix(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("read_matrix: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_matrix_csv(ss.str());
}

void write_matrix(const std::string& path, const Matrix& M) {
  std::ofstream f(path);
  if (!f) throw IoError("write_matrix: cannot open '" + path + "'");
  f << format_matrix_csv(M);
  if (!f) throw IoError("write_matrix: write failed for '" + path + "'");
}

}  // namespace tsvd
