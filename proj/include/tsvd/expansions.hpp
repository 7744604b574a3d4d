#pragma once

#include <optional>
#include <utility>

#include "tsvd/core.hpp"

namespace tsvd {

/// Conformal partition of U^T Delta V at the truncation index.
/// The squared block norms sum to ||Delta||_F^2.
struct EBlocks {
  Matrix E11;  // r x r
  Matrix E12;  // r x (n-r)
  Matrix E21;  // (m-r) x r
  Matrix E22;  // (m-r) x (n-r)
};

EBlocks partition_E(const SubspaceDecomposition& dec, const Matrix& delta);

enum class RotationMethod { ExactFixedPoint, Oracle, Series1, Series2 };

/// Rotation coefficients Q ((m-r) x r) and P ((n-r) x r) expressing the
/// perturbed singular subspaces in the unperturbed bases.  `defect` is the
/// Frobenius norm of the defining coupled equations' residual.
struct Rotations {
  Matrix Q;
  Matrix P;
  RotationMethod method = RotationMethod::ExactFixedPoint;
  int iterations = 0;
  double defect = 0.0;
};

/// Defect of the coupled quadratic system at (Q, P); zero at the exact
/// rotation coefficients.
double rotation_defect(const SubspaceDecomposition& dec, const EBlocks& e,
                       const Matrix& Q, const Matrix& P);

/// Solves the coupled quadratic system by fixed-point iteration: the
/// quadratic right-hand terms are frozen at the previous iterate and the
/// remaining linear system is solved in vectorized form.
Rotations rotations_exact(const SubspaceDecomposition& dec, const Matrix& delta,
                          double tol = 1e-13, int max_iter = 100);

/// Closed-form coefficients from the two decompositions:
/// Q = -(U2^T U~1)(U1^T U~1)^{-1}, P = (V2^T V~1)(V1^T V~1)^{-1}.
Rotations rotations_oracle(const SubspaceDecomposition& dec,
                           const SubspaceDecomposition& dec_tilde);

/// Perturbation series for the coefficients (order 1 or 2), solved through
/// the vectorized diagonal-plus-correction system.  When sigma2 vanishes the
/// closed forms in the exact-rank corollary are used and both paths are
/// cross-checked.
Rotations rotations_series(const SubspaceDecomposition& dec,
                           const Matrix& delta, int order);

/// Semi-orthogonal bases of the perturbed subspaces built from (Q, P).
struct RotatedBases {
  Matrix U1h, U2h, V1h, V2h;
};

RotatedBases rotated_bases(const SubspaceDecomposition& dec,
                           const Rotations& rot);

/// First-order models of the residual-subspace projector changes:
/// dPU2 = U1 Q^T U2^T + U2 Q U1^T, dPV2 = -V1 P^T V2^T - V2 P V1^T.
std::pair<Matrix, Matrix> projector_delta_first_order(
    const SubspaceDecomposition& dec, const Rotations& rot);

/// The three second-order correction terms of the truncation about an
/// exact-rank matrix.  Addends are pairwise trace-orthogonal.
struct SecondOrderTerms {
  Matrix pinv_left;   // pinv * Delta^T * PU2 * Delta * PV2
  Matrix pinv_right;  // PU2 * Delta * PV2 * Delta^T * pinv
  Matrix middle;      // PU2 * Delta * pinv^T * Delta * PV2
  Matrix sum() const { return pinv_left + pinv_right + middle; }
};

SecondOrderTerms second_order_terms(const SubspaceDecomposition& dec,
                                    const Matrix& delta);

/// Truncation expansion: approx = base + delta_term + double_sum
/// (+ second-order terms when order == 2).
struct ExpansionResult {
  Matrix approx;
  int order = 1;
  Matrix base;        // truncation of the unperturbed matrix
  Matrix delta_term;  // Delta - PU2 Delta PV2
  Matrix double_sum;  // cross-subspace coupling; zero about exact-rank points
  std::optional<SecondOrderTerms> second_order;
  bool gap_satisfied = true;  // false when evaluated under --force
};

/// First-order expansion of the rank-r truncation about a matrix with
/// sigma_r > sigma_{r+1}.  The gap condition is required unless forced.
ExpansionResult tsvd_first_order(const SubspaceDecomposition& dec,
                                 const Matrix& delta, bool force = false);

/// Directional derivative of the rank-r truncation; algebraically equal to
/// the first-order correction of tsvd_first_order.
Matrix directional_derivative(const SubspaceDecomposition& dec,
                              const Matrix& delta);

/// First-order expansion about an exact-rank matrix:
/// approx = X + Delta - PU2 Delta PV2.
ExpansionResult tsvd_first_order_rank_r(const SubspaceDecomposition& dec,
                                        const Matrix& delta,
                                        bool force = false);

/// Second-order expansion about an exact-rank matrix (adds the three
/// pseudoinverse-weighted terms).
ExpansionResult tsvd_second_order_rank_r(const SubspaceDecomposition& dec,
                                         const Matrix& delta,
                                         bool force = false);

}  // namespace tsvd
