#include "tsvd/core.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace tsvd {

namespace {

void require_finite(const Matrix& X, const char* what) {
  if (!X.allFinite()) {
    throw NumericalFailure(std::string(what) + ": non-finite entries");
  }
}

// First nonzero entry of each left singular vector made nonnegative; the
// matching right vector flips with it so the product is unchanged.
void fix_signs(Matrix& U, Matrix& V) {
  const Eigen::Index k = std::min(U.cols(), V.cols());
  for (Eigen::Index i = 0; i < U.cols(); ++i) {
    double lead = 0.0;
    for (Eigen::Index row = 0; row < U.rows(); ++row) {
      if (U(row, i) != 0.0) {
        lead = U(row, i);
        break;
      }
    }
    if (lead < 0.0) {
      U.col(i) = -U.col(i);
      if (i < k) V.col(i) = -V.col(i);
    }
  }
  // Trailing right null-space columns get the same convention.
  for (Eigen::Index i = k; i < V.cols(); ++i) {
    double lead = 0.0;
    for (Eigen::Index row = 0; row < V.rows(); ++row) {
      if (V(row, i) != 0.0) {
        lead = V(row, i);
        break;
      }
    }
    if (lead < 0.0) V.col(i) = -V.col(i);
  }
}

}  // namespace

SvdFactors full_svd(const Matrix& X) {
  require_finite(X, "full_svd");
  if (X.rows() < 1 || X.cols() < 1) {
    throw DimensionMismatch("full_svd: empty matrix");
  }
  if (X.rows() < X.cols()) {
    SvdFactors t = full_svd(X.transpose());
    return SvdFactors{std::move(t.V), std::move(t.sigma), std::move(t.U)};
  }
  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdFactors f{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (!f.U.allFinite() || !f.sigma.allFinite() || !f.V.allFinite()) {
    throw NumericalFailure("full_svd: decomposition produced non-finite factors");
  }
  fix_signs(f.U, f.V);
  return f;
}

bool SubspaceDecomposition::rank_r() const {
  const double floor = kRankTolerance * (sigma1.size() > 0 ? sigma1(0) : 0.0);
  return sigma2.size() == 0 || sigma2.maxCoeff() <= floor;
}

Matrix SubspaceDecomposition::sigma2_rect() const {
  Matrix S2 = Matrix::Zero(rows() - r, cols() - r);
  for (int i = 0; i < sigma2.size(); ++i) S2(i, i) = sigma2(i);
  return S2;
}

Matrix SubspaceDecomposition::truncation() const {
  return U1 * sigma1.asDiagonal() * V1.transpose();
}

SubspaceDecomposition subspace_decompose(const Matrix& X, int r) {
  const int k = static_cast<int>(std::min(X.rows(), X.cols()));
  if (r < 1 || r >= k) {
    throw RankOutOfRange("subspace_decompose: need 1 <= r < min(rows, cols), got r=" +
                         std::to_string(r));
  }
  SvdFactors f = full_svd(X);
  SubspaceDecomposition dec;
  dec.X = X;
  dec.r = r;
  dec.U1 = f.U.leftCols(r);
  dec.U2 = f.U.rightCols(f.U.cols() - r);
  dec.V1 = f.V.leftCols(r);
  dec.V2 = f.V.rightCols(f.V.cols() - r);
  dec.sigma1 = f.sigma.head(r);
  dec.sigma2 = f.sigma.tail(k - r);
  dec.tie = (dec.gap() <= kTieTolerance * f.sigma(0));
  return dec;
}

SubspaceDecomposition decomposition_from_factors(const Matrix& U,
                                                 const Vector& sigma,
                                                 const Matrix& V, int r) {
  const int m = static_cast<int>(U.rows());
  const int n = static_cast<int>(V.rows());
  const int k = std::min(m, n);
  if (U.cols() != m || V.cols() != n || sigma.size() != k) {
    throw DimensionMismatch("decomposition_from_factors: factor shapes");
  }
  if (r < 1 || r >= k) {
    throw RankOutOfRange("decomposition_from_factors: r out of range");
  }
  const double orth_u = (U.transpose() * U - Matrix::Identity(m, m)).norm();
  const double orth_v = (V.transpose() * V - Matrix::Identity(n, n)).norm();
  if (orth_u > 1e-10 * m || orth_v > 1e-10 * n) {
    throw ParameterOutOfRange("decomposition_from_factors: factors not orthonormal");
  }
  for (int i = 0; i + 1 < k; ++i) {
    if (sigma(i) < sigma(i + 1) || sigma(k - 1) < 0.0) {
      throw ParameterOutOfRange("decomposition_from_factors: sigma not descending >= 0");
    }
  }
  SubspaceDecomposition dec;
  dec.r = r;
  dec.U1 = U.leftCols(r);
  dec.U2 = U.rightCols(m - r);
  dec.V1 = V.leftCols(r);
  dec.V2 = V.rightCols(n - r);
  dec.sigma1 = sigma.head(r);
  dec.sigma2 = sigma.tail(k - r);
  Matrix S2 = Matrix::Zero(m - r, n - r);
  for (int i = 0; i < dec.sigma2.size(); ++i) S2(i, i) = dec.sigma2(i);
  dec.X = dec.U1 * dec.sigma1.asDiagonal() * dec.V1.transpose() +
          dec.U2 * S2 * dec.V2.transpose();
  dec.tie = (dec.gap() <= kTieTolerance * sigma(0));
  return dec;
}

ProjectorSet projectors(const SubspaceDecomposition& dec) {
  return ProjectorSet{dec.U1 * dec.U1.transpose(), dec.U2 * dec.U2.transpose(),
                      dec.V1 * dec.V1.transpose(), dec.V2 * dec.V2.transpose()};
}

Matrix truncate(const Matrix& X, int r) {
  return subspace_decompose(X, r).truncation();
}

std::vector<Matrix> tied_truncations(const Matrix& X, int r, double tol) {
  SvdFactors f = full_svd(X);
  const int k = static_cast<int>(f.sigma.size());
  if (r < 1 || r >= k) throw RankOutOfRange("tied_truncations: r out of range");
  const double scale = f.sigma(0) > 0.0 ? f.sigma(0) : 1.0;
  const double s_cut = f.sigma(r - 1);
  // Indices whose singular value ties with sigma_r.
  int lo = r - 1, hi = r - 1;
  while (lo > 0 && s_cut - f.sigma(lo - 1) >= -tol * scale &&
         f.sigma(lo - 1) - s_cut <= tol * scale) {
    --lo;
  }
  while (hi + 1 < k && f.sigma(hi + 1) >= s_cut - tol * scale) ++hi;

  const int keep_in_group = r - lo;  // tied slots that stay in the truncation
  std::vector<int> group;
  for (int i = lo; i <= hi; ++i) group.push_back(i);

  std::vector<Matrix> out;
  const Matrix base = f.U.leftCols(r) *
                      f.sigma.head(r).asDiagonal() *
                      f.V.leftCols(r).transpose();
  out.push_back(base);
  if (keep_in_group == static_cast<int>(group.size())) return out;  // no tie

  // Enumerate which members of the tied group occupy the kept slots.
  std::vector<bool> mask(group.size(), false);
  std::fill(mask.begin(), mask.begin() + keep_in_group, true);
  constexpr int kMaxCandidates = 64;
  do {
    std::vector<int> kept;
    for (int i = 0; i < lo; ++i) kept.push_back(i);
    for (size_t g = 0; g < group.size(); ++g) {
      if (mask[g]) kept.push_back(group[g]);
    }
    Matrix cand = Matrix::Zero(X.rows(), X.cols());
    for (int idx : kept) {
      cand += f.sigma(idx) * f.U.col(idx) * f.V.col(idx).transpose();
    }
    if ((cand - base).norm() > tol * scale) out.push_back(cand);
  } while (std::prev_permutation(mask.begin(), mask.end()) &&
           static_cast<int>(out.size()) < kMaxCandidates);
  return out;
}

Matrix pinv_rank_r(const SubspaceDecomposition& dec) {
  const double floor = kRankTolerance * dec.sigma1(0);
  if (dec.sigma_r() <= floor) {
    throw SingularTruncation("pinv_rank_r: sigma_r below rank tolerance");
  }
  return dec.U1 * dec.sigma1.cwiseInverse().asDiagonal() * dec.V1.transpose();
}

GapStatus gap_check(const SubspaceDecomposition& dec, const Matrix& delta) {
  if (delta.rows() != dec.rows() || delta.cols() != dec.cols()) {
    throw DimensionMismatch("gap_check: delta shape");
  }
  GapStatus s;
  s.gap = dec.gap();
  s.delta_spectral = spectral_norm(delta);
  s.delta_frobenius = delta.norm();
  s.midpoint = (dec.sigma_r() + dec.sigma_r1()) / 2.0;
  s.satisfied = s.delta_spectral < s.gap / 2.0;
  SvdFactors pert = full_svd(dec.X + delta);
  s.sigma_r_tilde = pert.sigma(dec.r - 1);
  s.sigma_r1_tilde = pert.sigma(dec.r);
  s.bracket_ok = (s.sigma_r1_tilde < s.midpoint) && (s.midpoint < s.sigma_r_tilde);
  if (s.satisfied && !s.bracket_ok) {
    throw NumericalFailure("gap_check: perturbed values fail to bracket the midpoint");
  }
  return s;
}

WeylMirskyMargins weyl_mirsky_margins(const Matrix& X, const Matrix& delta) {
  if (X.rows() != delta.rows() || X.cols() != delta.cols()) {
    throw DimensionMismatch("weyl_mirsky_margins: shapes differ");
  }
  const Vector s = full_svd(X).sigma;
  const Vector st = full_svd(X + delta).sigma;
  WeylMirskyMargins m;
  m.weyl_lhs = (st - s).cwiseAbs().maxCoeff();
  m.weyl_rhs = spectral_norm(delta);
  m.mirsky_lhs = (st - s).norm();
  m.mirsky_rhs = delta.norm();
  return m;
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return K;
}

Vector vec(const Matrix& A) {
  return Eigen::Map<const Vector>(A.data(), A.size());
}

KronCheck kron_vec_identity_check(const Matrix& A, const Matrix& B,
                                  const Matrix& C) {
  if (A.cols() != B.rows() || B.cols() != C.rows()) {
    throw DimensionMismatch("kron_vec_identity_check: product ABC undefined");
  }
  const Vector lhs = vec(A * B * C);
  const Vector rhs = kron(C.transpose(), A) * vec(B);
  const double rel = (lhs - rhs).norm() / std::max(1.0, lhs.norm());
  return KronCheck{rel <= 1e-12, rel};
}

double spectral_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
}

}  // namespace tsvd
