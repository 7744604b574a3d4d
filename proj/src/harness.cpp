#include "tsvd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tsvd/expansions.hpp"

namespace tsvd {

namespace {

constexpr double kNoiseFloor = 1e-13;

Matrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) M(i, j) = g(rng);
  }
  return M;
}

// QR of a Gaussian sample with the R-diagonal sign fix, so the factor is
// drawn uniformly and deterministically per generator state.
Matrix haar_orthogonal(int n, std::mt19937_64& rng) {
  const Matrix G = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    if (R(i, i) < 0.0) Q.col(i) = -Q.col(i);
  }
  return Q;
}

Assertion check_le(const std::string& name, double lhs, double rhs) {
  return Assertion{name, lhs, rhs, rhs - lhs, lhs <= rhs};
}

Matrix scaled_int_matrix(double num, double den,
                         std::initializer_list<std::initializer_list<int>> rows) {
  Matrix M(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (int v : row) M(i, j++) = num * v / den;
    ++i;
  }
  return M;
}

}  // namespace

Matrix gen_rank_structured(const SpectrumSpec& spec, std::uint64_t seed) {
  const int k = std::min(spec.rows, spec.cols);
  if (spec.rows < 1 || spec.cols < 1 ||
      static_cast<int>(spec.values.size()) != k) {
    throw ParameterOutOfRange("gen_rank_structured: need min(rows, cols) values");
  }
  for (int i = 0; i < k; ++i) {
    if (spec.values[i] < 0.0 || (i > 0 && spec.values[i] > spec.values[i - 1])) {
      throw ParameterOutOfRange("gen_rank_structured: spectrum must be "
                                "descending and nonnegative");
    }
  }
  std::mt19937_64 rng(seed);
  const Matrix U = haar_orthogonal(spec.rows, rng);
  const Matrix V = haar_orthogonal(spec.cols, rng);
  Matrix X = Matrix::Zero(spec.rows, spec.cols);
  for (int i = 0; i < k; ++i) {
    if (spec.values[i] > 0.0) {
      X += spec.values[i] * U.col(i) * V.col(i).transpose();
    }
  }
  return X;
}

Matrix gen_delta(int rows, int cols, double target_fro_norm, std::uint64_t seed,
                 DeltaStructure structure) {
  if (rows < 1 || cols < 1 || target_fro_norm < 0.0) {
    throw ParameterOutOfRange("gen_delta: bad shape or target norm");
  }
  if (target_fro_norm == 0.0) return Matrix::Zero(rows, cols);
  std::mt19937_64 rng(seed);
  Matrix D;
  switch (structure) {
    case DeltaStructure::Dense:
      D = gaussian_matrix(rows, cols, rng);
      break;
    case DeltaStructure::Rank1:
      D = gaussian_matrix(rows, 1, rng) * gaussian_matrix(1, cols, rng);
      break;
    case DeltaStructure::Rank2:
      D = gaussian_matrix(rows, 1, rng) * gaussian_matrix(1, cols, rng) +
          gaussian_matrix(rows, 1, rng) * gaussian_matrix(1, cols, rng);
      break;
  }
  const double norm = D.norm();
  if (norm == 0.0) throw NumericalFailure("gen_delta: degenerate sample");
  return target_fro_norm / norm * D;
}

std::vector<double> geometric_ladder(double from, double to, int steps) {
  if (!(from > 0.0) || !(to > 0.0) || steps < 2) {
    throw ParameterOutOfRange("geometric_ladder: need positive endpoints, steps >= 2");
  }
  std::vector<double> out(steps);
  const double ratio = std::log(to / from) / (steps - 1);
  for (int i = 0; i < steps; ++i) out[i] = from * std::exp(ratio * i);
  return out;
}

ConvergenceReport convergence_study(const Matrix& X, int r,
                                    const Matrix& direction,
                                    const std::vector<double>& eps_ladder,
                                    int order) {
  if (order != 1 && order != 2) {
    throw ParameterOutOfRange("convergence_study: order must be 1 or 2");
  }
  if (direction.rows() != X.rows() || direction.cols() != X.cols()) {
    throw DimensionMismatch("convergence_study: direction shape");
  }
  const double dn = direction.norm();
  if (dn == 0.0) {
    throw ParameterOutOfRange("convergence_study: direction is zero");
  }
  if (eps_ladder.size() < 2) {
    throw ParameterOutOfRange("convergence_study: ladder too short");
  }
  for (size_t i = 0; i + 1 < eps_ladder.size(); ++i) {
    if (!(eps_ladder[i] > eps_ladder[i + 1]) || !(eps_ladder.back() > 0.0)) {
      throw ParameterOutOfRange("convergence_study: ladder must be strictly "
                                "decreasing and positive");
    }
  }
  const Matrix dhat = direction / dn;
  const SubspaceDecomposition dec = subspace_decompose(X, r);

  ConvergenceReport rep;
  rep.eps_ladder = eps_ladder;
  rep.order_tested = order;
  for (double eps : eps_ladder) {
    const Matrix delta = eps * dhat;
    Matrix approx;
    if (order == 2) {
      approx = tsvd_second_order_rank_r(dec, delta).approx;
    } else if (dec.rank_r()) {
      approx = tsvd_first_order_rank_r(dec, delta).approx;
    } else {
      approx = tsvd_first_order(dec, delta).approx;
    }
    rep.residual_norms.push_back((truncate(X + delta, r) - approx).norm());
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int used = 0;
  for (size_t i = 0; i < eps_ladder.size(); ++i) {
    if (rep.residual_norms[i] < kNoiseFloor) continue;
    const double x = std::log(eps_ladder[i]);
    const double y = std::log(rep.residual_norms[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used < 3) {
    throw DegenerateFit("convergence_study: fewer than 3 points above the "
                        "noise floor");
  }
  rep.used_points = used;
  rep.slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
  rep.intercept = (sy - rep.slope * sx) / used;
  return rep;
}

SearchReport bound_search(const Matrix& X, int r, int trials, double lo,
                          double hi, std::uint64_t seed,
                          BoundCriterion criterion) {
  if (trials < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw ParameterOutOfRange("bound_search: need trials >= 1, 0 < lo <= hi");
  }
  SearchReport rep;
  rep.trials = trials;
  switch (criterion) {
    case BoundCriterion::Trivial:
      rep.bound_constant = 2.0;
      break;
    case BoundCriterion::Quadratic:
      rep.bound_constant = quadratic_constant();
      break;
    case BoundCriterion::Combined:
      rep.bound_constant = combined_constant();
      break;
    case BoundCriterion::Asymptotic:
      rep.bound_constant = asymptotic_constant();
      break;
  }
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = seed + static_cast<std::uint64_t>(t);
    double norm = lo;
    if (hi > lo) {
      std::mt19937_64 rng(trial_seed ^ 0x9e3779b97f4a7c15ull);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      norm = std::exp(std::log(lo) + u(rng) * (std::log(hi) - std::log(lo)));
    }
    const Matrix delta = gen_delta(static_cast<int>(X.rows()),
                                   static_cast<int>(X.cols()), norm, trial_seed);
    const ResidualReport res = residual(X, r, delta);
    double ratio = 0.0;
    bool violated = false;
    switch (criterion) {
      case BoundCriterion::Trivial:
        ratio = res.ratio;
        violated = res.residual_norm > res.bound_trivial + 1e-9;
        break;
      case BoundCriterion::Quadratic:
        ratio = res.ratio;
        violated = res.residual_norm > res.bound_quadratic + 1e-9;
        break;
      case BoundCriterion::Combined:
        ratio = res.ratio;
        violated = res.residual_norm > res.bound_combined + 1e-9;
        break;
      case BoundCriterion::Asymptotic:
        ratio = res.residual_norm / (res.delta_norm * res.delta_norm);
        violated = ratio > 1.01 * asymptotic_constant() / res.sigma_r;
        break;
    }
    if (violated) ++rep.violations;
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.argmax_norm = norm;
      rep.argmax_seed = trial_seed;
    }
  }
  return rep;
}

void require_pass(const GoldenReport& report) {
  if (report.all_pass) return;
  std::string msg = report.name + ": failed assertions:";
  for (const auto& a : report.assertions) {
    if (!a.pass) {
      msg += " " + a.name + " (lhs=" + std::to_string(a.lhs) +
             ", rhs=" + std::to_string(a.rhs) + ")";
    }
  }
  throw GoldenMismatch(msg);
}

Example1Data example1_data() {
  Example1Data d;
  d.X = scaled_int_matrix(1, 2, {{4, -4, 7}, {0, 0, -9}, {4, 8, 1}, {8, 4, -1}});
  d.U = scaled_int_matrix(1, 2, {{-1, 1, 1, 1}, {1, -1, 1, 1}, {1, 1, -1, 1}, {1, 1, 1, -1}});
  d.V = scaled_int_matrix(1, 3, {{1, 2, 2}, {2, 1, -2}, {-2, 2, -1}});
  d.sigma = Vector(3);
  d.sigma << 6, 6, 3;
  d.delta = scaled_int_matrix(3, 200, {{3, 3, -9}, {-3, -9, 3}, {7, 5, -5}, {-1, 7, -7}});
  d.truncation_ref =
      scaled_int_matrix(1, 1, {{1, -1, 4}, {-1, 1, -4}, {3, 3, 0}, {3, 3, 0}});
  d.pu1_ref = scaled_int_matrix(1, 2, {{1, -1, 0, 0}, {-1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}});
  d.pu2_ref = scaled_int_matrix(1, 2, {{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, -1}, {0, 0, -1, 1}});
  d.pv1_ref = scaled_int_matrix(1, 9, {{5, 4, 2}, {4, 5, -2}, {2, -2, 8}});
  d.pv2_ref = scaled_int_matrix(1, 9, {{4, -4, -2}, {-4, 4, 2}, {-2, 2, 1}});
  d.proj_delta_ref =
      scaled_int_matrix(3, 200, {{2, -2, -1}, {2, -2, -1}, {2, -2, -1}, {-2, 2, 1}});
  d.coupling_ref =
      scaled_int_matrix(1, 200, {{-6, 3, 0}, {2, -5, -4}, {-2, 5, 4}, {-6, 3, 0}});
  d.first_order_ref = d.truncation_ref + d.delta - d.proj_delta_ref + d.coupling_ref;
  d.exact_truncation_ref = Matrix(4, 3);
  d.exact_truncation_ref << 0.9840, -0.9088, 3.8792,
                            -1.0632, 0.8689, -3.9615,
                             3.0650, 3.1284, -0.0403,
                             2.9870, 3.0890, -0.1213;
  d.u3u3t_ref = scaled_int_matrix(1, 4, {{1, 1, -1, 1}, {1, 1, -1, 1}, {-1, -1, 1, -1}, {1, 1, -1, 1}});
  d.u12v12t_ref = scaled_int_matrix(1, 18, {{3, -3, 12}, {-3, 3, -12}, {9, 9, 0}, {9, 9, 0}});
  d.u3v3t_ref = scaled_int_matrix(1, 6, {{2, -2, -1}, {2, -2, -1}, {-2, 2, 1}, {2, -2, -1}});
  d.first_order_error_ref = 0.0043;
  d.zero_order_error_ref = 0.3016;
  d.delta_fro_ref = 0.2985;
  return d;
}

Example2Data example2_data() {
  Example2Data d;
  d.X = Matrix::Zero(4, 3);
  d.X(0, 0) = 2.0;
  d.X(1, 1) = 2.0;
  d.X(2, 2) = 1.0;
  d.delta = Matrix::Zero(4, 3);
  d.delta(0, 0) = 0.1;
  d.delta(1, 1) = -0.5;
  d.delta(2, 2) = 0.5;
  d.forced_ref = Matrix::Zero(4, 3);
  d.forced_ref(0, 0) = 2.1;
  d.forced_ref(1, 1) = 1.5;
  d.alternative_ref = Matrix::Zero(4, 3);
  d.alternative_ref(0, 0) = 2.1;
  d.alternative_ref(2, 2) = 1.5;
  return d;
}

GoldenReport reproduce_example1() {
  const Example1Data d = example1_data();
  GoldenReport rep;
  rep.name = "example1";

  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  const ProjectorSet pr = projectors(dec);
  const GapStatus gap = gap_check(dec, d.delta);
  const ExpansionResult exp = tsvd_first_order(dec, d.delta);
  const Matrix trunc = truncate(d.X, 2);
  const Matrix exact = truncate(d.X + d.delta, 2);
  const double first_err = (exact - exp.approx).norm();
  const double zero_err = (exact - trunc).norm();

  rep.assertions.push_back(check_le("sigma_reference",
                                    (full_svd(d.X).sigma - d.sigma).norm(), 1e-12));
  rep.assertions.push_back(check_le("truncation_reference",
                                    (trunc - d.truncation_ref).norm(), 1e-12));
  rep.assertions.push_back(check_le("projector_pu2_reference",
                                    (pr.PU2 - d.pu2_ref).norm(), 1e-12));
  rep.assertions.push_back(check_le("projector_pv2_reference",
                                    (pr.PV2 - d.pv2_ref).norm(), 1e-12));
  rep.assertions.push_back(check_le(
      "projected_delta_reference",
      (pr.PU2 * d.delta * pr.PV2 - d.proj_delta_ref).norm(), 1e-12));
  rep.assertions.push_back(check_le("coupling_reference",
                                    (exp.double_sum - d.coupling_ref).norm(), 1e-12));
  rep.assertions.push_back(check_le("first_order_reference",
                                    (exp.approx - d.first_order_ref).norm(), 1e-12));
  rep.assertions.push_back(check_le(
      "exact_truncation_reference",
      (exact - d.exact_truncation_ref).cwiseAbs().maxCoeff(), 5e-5));
  rep.assertions.push_back(check_le("first_order_error",
                                    std::abs(first_err - d.first_order_error_ref), 1e-4));
  rep.assertions.push_back(check_le("zero_order_error",
                                    std::abs(zero_err - d.zero_order_error_ref), 1e-4));
  rep.assertions.push_back(check_le("delta_frobenius",
                                    std::abs(gap.delta_frobenius - d.delta_fro_ref), 1e-4));
  Assertion gap_ok{"gap_condition", gap.delta_spectral, gap.gap / 2.0,
                   gap.gap / 2.0 - gap.delta_spectral, gap.satisfied};
  rep.assertions.push_back(gap_ok);

  rep.scalars["first_order_error"] = first_err;
  rep.scalars["zero_order_error"] = zero_err;
  rep.scalars["delta_frobenius"] = gap.delta_frobenius;
  rep.scalars["gap"] = gap.gap;
  rep.all_pass = std::all_of(rep.assertions.begin(), rep.assertions.end(),
                             [](const Assertion& a) { return a.pass; });
  return rep;
}

GoldenReport reproduce_example2() {
  const Example2Data d = example2_data();
  GoldenReport rep;
  rep.name = "example2";

  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  const GapStatus gap = gap_check(dec, d.delta);
  const ExpansionResult forced = tsvd_first_order(dec, d.delta, /*force=*/true);
  const SubspaceDecomposition dec_t = subspace_decompose(d.X + d.delta, 2);
  const std::vector<Matrix> cands = tied_truncations(d.X + d.delta, 2);

  // The perturbation sits exactly on the boundary, so the condition fails.
  Assertion gap_violated{"gap_violation_detected", gap.delta_spectral,
                         gap.gap / 2.0, gap.delta_spectral - gap.gap / 2.0,
                         !gap.satisfied};
  rep.assertions.push_back(gap_violated);
  rep.assertions.push_back(check_le("forced_first_order_reference",
                                    (forced.approx - d.forced_ref).norm(), 1e-12));
  Assertion tie{"tie_flagged", dec_t.gap(), kTieTolerance * dec_t.sigma1(0),
                kTieTolerance * dec_t.sigma1(0) - dec_t.gap(), dec_t.tie};
  rep.assertions.push_back(tie);
  Assertion two{"two_truncations_enumerated", static_cast<double>(cands.size()),
                2.0, static_cast<double>(cands.size()) - 2.0, cands.size() >= 2};
  rep.assertions.push_back(two);
  double miss_det = 1e300, miss_alt = 1e300;
  for (const Matrix& c : cands) {
    miss_det = std::min(miss_det, (c - d.forced_ref).norm());
    miss_alt = std::min(miss_alt, (c - d.alternative_ref).norm());
  }
  rep.assertions.push_back(check_le("deterministic_candidate_matches_formula",
                                    miss_det, 1e-9));
  rep.assertions.push_back(check_le("alternative_candidate_found", miss_alt, 1e-9));
  const double alt_dist = (d.forced_ref - d.alternative_ref).norm();
  rep.assertions.push_back(check_le("alternative_distance",
                                    std::abs(alt_dist - 1.5 * std::sqrt(2.0)), 1e-12));

  rep.scalars["delta_spectral"] = gap.delta_spectral;
  rep.scalars["gap"] = gap.gap;
  rep.scalars["candidates"] = static_cast<double>(cands.size());
  rep.scalars["alternative_distance"] = alt_dist;
  rep.all_pass = std::all_of(rep.assertions.begin(), rep.assertions.end(),
                             [](const Assertion& a) { return a.pass; });
  return rep;
}

}  // namespace tsvd
