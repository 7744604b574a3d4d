#pragma once

#include "tsvd/core.hpp"
#include "tsvd/expansions.hpp"

namespace tsvd {

// Constants of the residual bounds for the first-order truncation model:
// ||R||_F <= quadratic_constant / sigma_r * ||Delta||_F^2 globally, with the
// ratio bracketed below by lower_bound_constant; asymptotically the sharp
// coefficient is 1 / (sigma_r * sqrt(3)).
inline double quadratic_constant() { return 4.0 * (1.0 + std::sqrt(2.0)); }
inline double combined_constant() { return 2.0 * (1.0 + std::sqrt(2.0)); }
inline double lower_bound_constant() { return 1.0 + 1.0 / std::sqrt(2.0); }
inline double asymptotic_constant() { return 1.0 / std::sqrt(3.0); }

/// Residual of the first-order model about an exact-rank matrix, with every
/// bound evaluated on the same instance.
struct ResidualReport {
  Matrix residual;              // truncate(X+Delta, r) - (X + Delta - PU2 Delta PV2)
  double residual_norm = 0.0;
  double bound_trivial = 0.0;   // ||X||_F + 2 ||Delta||_F
  double bound_quadratic = 0.0; // 4(1+sqrt2) ||Delta||_F^2 / sigma_r
  double bound_combined = 0.0;  // 2(1+sqrt2) ||Delta||_F min(2||Delta||_F/sigma_r, 1)
  double ratio = 0.0;           // sigma_r ||R||_F / ||Delta||_F^2
  bool ratio_defined = false;   // false when Delta == 0
  bool nonunique_truncation = false;
  double sigma_r = 0.0;
  double delta_norm = 0.0;
};

ResidualReport residual(const Matrix& X, int r, const Matrix& delta);

/// The second-order residual model (three pseudoinverse-weighted terms).
/// Its norm is computed through the orthogonal-addend identity and
/// cross-checked against direct evaluation.
struct SecondOrderResidual {
  SecondOrderTerms terms;
  Matrix sum;
  double norm = 0.0;         // sqrt of the summed squared addend norms
  double norm_direct = 0.0;  // ||sum||_F evaluated directly
};

SecondOrderResidual residual_second_order(const SubspaceDecomposition& dec,
                                          const Matrix& delta);

/// Exact projector-shift inequalities, evaluated from the SVDs of X and
/// X + Delta: the shift acting on X is bounded by 2||Delta||_F, and the
/// mixed projector-shift-on-Delta term by (2/sigma_r)||Delta||_F^2.
struct ProjectorShiftMargins {
  double x_shift_lhs = 0.0;      // max(||dPU2 X||_F, ||X dPV2||_F)
  double x_shift_rhs = 0.0;      // 2 ||Delta||_F
  double mixed_shift_lhs = 0.0;  // max(||PU2 dPU2 Delta||_F, ||Delta dPV2 PV2||_F)
  double mixed_shift_rhs = 0.0;  // (2/sigma_r) ||Delta||_F^2
  double x_shift_margin() const { return x_shift_rhs - x_shift_lhs; }
  double mixed_shift_margin() const { return mixed_shift_rhs - mixed_shift_lhs; }
};

ProjectorShiftMargins lemma_margins(const Matrix& X, int r, const Matrix& delta);

/// Rank-2 perturbation attaining the residual-ratio lower bound as eps -> 0:
/// Delta = (sigma - sigma_r - eps) u_r v_r^T + sigma u_{r+1} v_{r+1}^T.
Matrix extremal_delta_lower(const SubspaceDecomposition& dec, double sigma,
                            double eps);

/// Perturbation attaining the asymptotic sharp constant:
/// Delta = (eps/sqrt(3)) (u_r v_{r+1}^T + u_{r+1} v_r^T + u_{r+1} v_{r+1}^T).
Matrix extremal_delta_asymptotic(const SubspaceDecomposition& dec, double eps);

/// Evaluates the residual plus every bound and the singular-value
/// inequalities on one instance.  Slack absorbs decomposition rounding.
struct BoundSuiteReport {
  ResidualReport res;
  WeylMirskyMargins wm;
  double slack = 1e-9;
  bool trivial_ok = false;
  bool quadratic_ok = false;
  bool combined_ok = false;
  bool weyl_ok = false;
  bool mirsky_ok = false;
  bool all_ok = false;
};

BoundSuiteReport bound_suite(const Matrix& X, int r, const Matrix& delta);

}  // namespace tsvd
