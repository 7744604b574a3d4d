#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tsvd/errors.hpp"

namespace tsvd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Singular value below rank_tolerance() * sigma_1 counts as zero.
inline constexpr double kRankTolerance = 1e-14;
// Gap below tie_tolerance() * sigma_1 marks a non-unique truncation.
inline constexpr double kTieTolerance = 1e-12;

/// Full SVD with a deterministic sign convention: the first nonzero entry
/// of each left singular vector is nonnegative.  sigma has length min(m,n),
/// descending.  Inputs with rows < cols are handled by transposition.
struct SvdFactors {
  Matrix U;      // m x m, orthogonal
  Vector sigma;  // min(m,n), descending, >= 0
  Matrix V;      // n x n, orthogonal
};

SvdFactors full_svd(const Matrix& X);

/// Split of the SVD at index r into dominant and residual blocks.
/// Carries the original matrix so downstream operations can reach it.
struct SubspaceDecomposition {
  Matrix X;
  int r = 0;
  Matrix U1;      // m x r
  Matrix U2;      // m x (m-r)
  Vector sigma1;  // r
  Vector sigma2;  // min(m,n) - r
  Matrix V1;      // n x r
  Matrix V2;      // n x (n-r)
  bool tie = false;  // sigma_r == sigma_{r+1} within tie tolerance

  int rows() const { return static_cast<int>(X.rows()); }
  int cols() const { return static_cast<int>(X.cols()); }
  double sigma_r() const { return sigma1(r - 1); }
  double sigma_r1() const { return sigma2.size() > 0 ? sigma2(0) : 0.0; }
  double gap() const { return sigma_r() - sigma_r1(); }
  bool rank_r() const;  // sigma2 entirely below the rank tolerance

  // Rectangular (m-r) x (n-r) diagonal carrying sigma2.
  Matrix sigma2_rect() const;
  // Kept part U1 * diag(sigma1) * V1^T.
  Matrix truncation() const;
};

SubspaceDecomposition subspace_decompose(const Matrix& X, int r);

/// Builds a decomposition from explicit factors (columns of U and V with
/// the singular values in sigma, descending).  Validates orthonormality and
/// ordering; X is reconstructed from the factors.
SubspaceDecomposition decomposition_from_factors(const Matrix& U,
                                                 const Vector& sigma,
                                                 const Matrix& V, int r);

struct ProjectorSet {
  Matrix PU1, PU2;  // m x m
  Matrix PV1, PV2;  // n x n
};

ProjectorSet projectors(const SubspaceDecomposition& dec);

/// Best Frobenius-norm rank-r approximation (keeps the r largest singular
/// values under the deterministic ordering).
Matrix truncate(const Matrix& X, int r);

/// All axis choices of the rank-r truncation when singular values tie at
/// the cut.  The deterministic choice comes first.  Enumeration is capped;
/// with a tie the list is a sample of valid truncations, not a basis sweep.
std::vector<Matrix> tied_truncations(const Matrix& X, int r,
                                     double tol = kTieTolerance);

/// Rank-r pseudoinverse in the orientation X pinv^T = P_U1, X^T pinv = P_V1
/// (an m x n matrix; its spectral norm is 1/sigma_r).
Matrix pinv_rank_r(const SubspaceDecomposition& dec);

struct GapStatus {
  double gap = 0.0;              // sigma_r - sigma_{r+1}
  double delta_spectral = 0.0;   // ||Delta||_2
  double delta_frobenius = 0.0;  // ||Delta||_F
  bool satisfied = false;        // ||Delta||_2 < gap/2
  double midpoint = 0.0;         // (sigma_r + sigma_{r+1})/2
  // Perturbed values at the cut; when satisfied, they bracket the midpoint.
  double sigma_r_tilde = 0.0;
  double sigma_r1_tilde = 0.0;
  bool bracket_ok = false;
};

GapStatus gap_check(const SubspaceDecomposition& dec, const Matrix& delta);

/// Slack in the classical singular-value perturbation inequalities:
/// max_i |sigma~_i - sigma_i| <= ||Delta||_2 (Weyl) and the Euclidean
/// aggregate <= ||Delta||_F (Mirsky).
struct WeylMirskyMargins {
  double weyl_lhs = 0.0;
  double weyl_rhs = 0.0;
  double mirsky_lhs = 0.0;
  double mirsky_rhs = 0.0;
  double weyl_margin() const { return weyl_rhs - weyl_lhs; }
  double mirsky_margin() const { return mirsky_rhs - mirsky_lhs; }
};

WeylMirskyMargins weyl_mirsky_margins(const Matrix& X, const Matrix& delta);

Matrix kron(const Matrix& A, const Matrix& B);
Vector vec(const Matrix& A);

struct KronCheck {
  bool ok = false;
  double residual = 0.0;  // relative to max(1, ||vec(ABC)||)
};

/// Verifies vec(A B C) = (C^T kron A) vec(B).
KronCheck kron_vec_identity_check(const Matrix& A, const Matrix& B,
                                  const Matrix& C);

double spectral_norm(const Matrix& A);

}  // namespace tsvd
