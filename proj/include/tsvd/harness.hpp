#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tsvd/bounds.hpp"
#include "tsvd/core.hpp"

namespace tsvd {

/// Target spectrum for a generated test matrix.
struct SpectrumSpec {
  std::vector<double> values;  // length min(rows, cols), descending, >= 0
  int rows = 0;
  int cols = 0;
};

/// X = U diag(values) V^T with seeded Haar-like orthonormal factors;
/// deterministic per seed.
Matrix gen_rank_structured(const SpectrumSpec& spec, std::uint64_t seed);

enum class DeltaStructure { Dense, Rank1, Rank2 };

/// Seeded random perturbation scaled to the requested Frobenius norm.
Matrix gen_delta(int rows, int cols, double target_fro_norm, std::uint64_t seed,
                 DeltaStructure structure = DeltaStructure::Dense);

std::vector<double> geometric_ladder(double from, double to, int steps);

/// Fitted decay order of the expansion residual over a shrinking ladder.
struct ConvergenceReport {
  std::vector<double> eps_ladder;      // strictly decreasing
  std::vector<double> residual_norms;  // nonnegative
  double slope = 0.0;                  // least-squares log-log slope
  double intercept = 0.0;
  int order_tested = 1;
  int used_points = 0;  // points above the noise floor
};

/// For each eps, the distance between the true truncation of X + eps*d and
/// the order-1/2 expansion (d is the unit-Frobenius direction).  Points with
/// residual below 1e-13 are excluded from the fit as noise.
ConvergenceReport convergence_study(const Matrix& X, int r,
                                    const Matrix& direction,
                                    const std::vector<double>& eps_ladder,
                                    int order);

enum class BoundCriterion { Trivial, Quadratic, Combined, Asymptotic };

/// Randomized residual-bound sweep.  Perturbation norms are log-uniform over
/// [lo, hi] (fixed when lo == hi); per-trial generators are seeded with
/// seed + trial index, so reports are reproducible and order-independent.
struct SearchReport {
  int trials = 0;
  double max_ratio = 0.0;   // sigma_r ||R||/||Delta||^2, or ||R||/||Delta||^2
                            // for the asymptotic criterion
  double argmax_norm = 0.0;
  std::uint64_t argmax_seed = 0;
  double bound_constant = 0.0;
  int violations = 0;
};

SearchReport bound_search(const Matrix& X, int r, int trials, double lo,
                          double hi, std::uint64_t seed,
                          BoundCriterion criterion = BoundCriterion::Quadratic);

/// One named check inside a golden report: pass iff lhs <= rhs (margin is
/// rhs - lhs), except for strict-violation checks which document themselves.
struct Assertion {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool pass = false;
};

struct GoldenReport {
  std::string name;
  std::vector<Assertion> assertions;
  std::map<std::string, double> scalars;
  bool all_pass = false;
};

/// Throws GoldenMismatch listing every failed assertion.
void require_pass(const GoldenReport& report);

/// Worked example 1: a 4x3 matrix with a repeated leading singular value and
/// a dense perturbation, with every intermediate known in closed form.
/// Reference matrices are stored as integer grids with rational scales.
struct Example1Data {
  Matrix X;
  Matrix U;  // exact orthogonal factor, 4x4
  Matrix V;  // exact orthogonal factor, 3x3
  Vector sigma;
  Matrix delta;
  Matrix truncation_ref;        // rank-2 truncation of X
  Matrix pu1_ref, pu2_ref;      // projectors, 4x4
  Matrix pv1_ref, pv2_ref;      // projectors, 3x3
  Matrix proj_delta_ref;        // PU2 * delta * PV2
  Matrix coupling_ref;          // double-sum correction
  Matrix first_order_ref;       // first-order expansion
  Matrix exact_truncation_ref;  // truncation of X + delta, 4 decimals
  Matrix u3u3t_ref;             // third left dyad
  Matrix u12v12t_ref;           // u1 v1^T + u2 v2^T
  Matrix u3v3t_ref;             // u3 v3^T
  double first_order_error_ref = 0.0;
  double zero_order_error_ref = 0.0;
  double delta_fro_ref = 0.0;
};

Example1Data example1_data();

/// Worked example 2: diagonal instance where the perturbation sits exactly
/// on the gap boundary and the perturbed truncation is non-unique.
struct Example2Data {
  Matrix X;
  Matrix delta;
  Matrix forced_ref;       // first-order formula evaluated under force
  Matrix alternative_ref;  // the other valid truncation of X + delta
};

Example2Data example2_data();

GoldenReport reproduce_example1();
GoldenReport reproduce_example2();

}  // namespace tsvd
