#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"
#include "tsvd/expansions.hpp"
#include "tsvd/harness.hpp"

using namespace tsvd;

namespace {

// Gap-satisfying random instance: spectrum with a clean cut at r.
SubspaceDecomposition random_instance(int m, int n, int r, std::uint64_t seed,
                                      bool rank_deficient) {
  const int k = std::min(m, n);
  Vector sigma(k);
  for (int i = 0; i < k; ++i) {
    sigma(i) = i < r ? 4.0 - 2.0 * i / std::max(1, r)
                     : (rank_deficient ? 0.0
                                       : 0.5 - 0.4 * (i - r) / std::max(1, k - r));
  }
  return subspace_decompose(testutil::with_spectrum(sigma, m, n, seed), r);
}

Matrix small_delta(const SubspaceDecomposition& dec, std::uint64_t seed) {
  Matrix D = testutil::gaussian(dec.rows(), dec.cols(), seed);
  return 0.2 * dec.gap() / 2.0 / spectral_norm(D) * D;
}

}  // namespace

TEST_CASE("partition_E: zero, diagonal instance, norm identity") {
  const Example2Data d2 = example2_data();
  const SubspaceDecomposition dec = subspace_decompose(d2.X, 2);

  const EBlocks z = partition_E(dec, Matrix::Zero(4, 3));
  CHECK(z.E11.norm() == 0.0);
  CHECK(z.E22.norm() == 0.0);

  const EBlocks e = partition_E(dec, d2.delta);
  Matrix e11_ref = Matrix::Zero(2, 2);
  e11_ref(0, 0) = 0.1;
  e11_ref(1, 1) = -0.5;
  CHECK((e.E11 - e11_ref).norm() <= 1e-12);
  CHECK(std::abs(e.E22(0, 0) - 0.5) <= 1e-12);
  CHECK(e.E12.norm() <= 1e-12);
  CHECK(e.E21.norm() <= 1e-12);

  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix D = testutil::gaussian(4, 3, 900 + s);
    const EBlocks b = partition_E(dec, D);
    const double total = b.E11.squaredNorm() + b.E12.squaredNorm() +
                         b.E21.squaredNorm() + b.E22.squaredNorm();
    CHECK(std::abs(total - D.squaredNorm()) <= 1e-10 * D.squaredNorm());
  }
}

TEST_CASE("rotations_exact: zero perturbation converges immediately") {
  const SubspaceDecomposition dec = random_instance(5, 4, 2, 1, false);
  const Rotations rot = rotations_exact(dec, Matrix::Zero(5, 4));
  CHECK(rot.Q.norm() == 0.0);
  CHECK(rot.P.norm() == 0.0);
  CHECK(rot.iterations == 1);
  CHECK(rot.defect == 0.0);
}

TEST_CASE("rotations_exact: agrees with the closed-form alignment") {
  const Example1Data d = example1_data();
  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  const Rotations ex = rotations_exact(dec, d.delta);
  CHECK(ex.defect <= 1e-10 * std::max(1.0, dec.sigma1(0)));

  const SubspaceDecomposition dec_t = subspace_decompose(d.X + d.delta, 2);
  const Rotations orc = rotations_oracle(dec, dec_t);
  CHECK((ex.Q - orc.Q).norm() <= 1e-10);
  CHECK((ex.P - orc.P).norm() <= 1e-10);
}

TEST_CASE("rotations_exact: coefficients scale linearly with the perturbation") {
  const Example1Data d = example1_data();
  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  const Matrix dhat = d.delta / d.delta.norm();
  std::vector<double> eps, qn;
  for (double e = 1e-2; e >= 0.9e-6; e /= 10.0) {
    const Rotations rot = rotations_exact(dec, e * dhat);
    eps.push_back(e);
    qn.push_back(rot.Q.norm());
  }
  const double slope = testutil::loglog_slope(eps, qn, 1e-300);
  CHECK(slope == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("rotations_exact: gap violation rejected") {
  const Example2Data d = example2_data();
  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  CHECK_THROWS_AS(rotations_exact(dec, d.delta), GapViolation);
}

TEST_CASE("rotations_oracle: zero perturbation and projector round trip") {
  const SubspaceDecomposition dec = random_instance(6, 5, 3, 2, false);
  const Rotations z = rotations_oracle(dec, dec);
  CHECK(z.Q.norm() <= 1e-12);
  CHECK(z.P.norm() <= 1e-12);

  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix delta = small_delta(dec, 40 + s);
    const SubspaceDecomposition dec_t = subspace_decompose(dec.X + delta, 3);
    const Rotations rot = rotations_oracle(dec, dec_t);
    CHECK(rot.defect <= 1e-9 * std::max(1.0, dec.sigma1(0)));
    const RotatedBases bases = rotated_bases(dec, rot);
    const Matrix pu1_hat = bases.U1h * bases.U1h.transpose();
    const Matrix pu1_tilde = dec_t.U1 * dec_t.U1.transpose();
    CHECK((pu1_hat - pu1_tilde).norm() <= 1e-9);
    const Matrix pv1_hat = bases.V1h * bases.V1h.transpose();
    const Matrix pv1_tilde = dec_t.V1 * dec_t.V1.transpose();
    CHECK((pv1_hat - pv1_tilde).norm() <= 1e-9);
  }
}

TEST_CASE("rotations_series: zero perturbation") {
  const SubspaceDecomposition dec = random_instance(5, 4, 2, 3, false);
  for (int order : {1, 2}) {
    const Rotations rot = rotations_series(dec, Matrix::Zero(5, 4), order);
    CHECK(rot.Q.norm() == 0.0);
    CHECK(rot.P.norm() == 0.0);
  }
  CHECK_THROWS_AS(rotations_series(dec, Matrix::Zero(5, 4), 3),
                  ParameterOutOfRange);
}

TEST_CASE("rotations_oracle: orthogonal perturbed subspaces rejected") {
  // Swapping the dominant direction of diag(2, 1) makes the perturbed
  // dominant subspace orthogonal to the base one.
  Matrix X = Matrix::Zero(3, 2);
  X(0, 0) = 2.0;
  X(1, 1) = 1.0;
  Matrix Xt = Matrix::Zero(3, 2);
  Xt(0, 0) = 1.0;
  Xt(1, 1) = 2.0;
  const SubspaceDecomposition dec = subspace_decompose(X, 1);
  const SubspaceDecomposition dec_t = subspace_decompose(Xt, 1);
  CHECK_THROWS_AS(rotations_oracle(dec, dec_t), SingularAlignment);
}

TEST_CASE("expansions reject a repeated value at the cut") {
  Matrix X = Matrix::Zero(4, 3);
  X(0, 0) = 2.0;
  X(1, 1) = 2.0;
  X(2, 2) = 1.0;
  const SubspaceDecomposition dec = subspace_decompose(X, 1);
  REQUIRE(dec.tie);
  // The coefficients are undefined here, so force cannot override.
  CHECK_THROWS_AS(tsvd_first_order(dec, Matrix::Zero(4, 3), true), GapViolation);
  CHECK_THROWS_AS(directional_derivative(dec, Matrix::Zero(4, 3)), GapViolation);
}

TEST_CASE("rank-r expansions: force flag admits large perturbations") {
  const SubspaceDecomposition dec = random_instance(6, 4, 2, 77, true);
  const Matrix big = 2.0 * dec.sigma_r() * testutil::gaussian(6, 4, 78).normalized();
  CHECK_THROWS_AS(tsvd_first_order_rank_r(dec, big), GapViolation);
  const ExpansionResult res = tsvd_first_order_rank_r(dec, big, /*force=*/true);
  CHECK_FALSE(res.gap_satisfied);
  CHECK(res.approx.allFinite());
  const ExpansionResult res2 = tsvd_second_order_rank_r(dec, big, /*force=*/true);
  CHECK_FALSE(res2.gap_satisfied);
  CHECK(res2.approx.allFinite());
}

TEST_CASE("rotations_series: error decays at the expected order") {
  // General instance with a nonzero residual block, so the vectorized
  // solve is exercised rather than the exact-rank closed form.
  const Example1Data d = example1_data();
  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  const Matrix dhat = d.delta / d.delta.norm();
  std::vector<double> eps, e1q, e2q, e1p, e2p;
  for (double e = 1e-2; e >= 0.9e-4; e /= std::sqrt(10.0)) {
    const Matrix delta = e * dhat;
    const Rotations exact = rotations_exact(dec, delta);
    const Rotations s1 = rotations_series(dec, delta, 1);
    const Rotations s2 = rotations_series(dec, delta, 2);
    eps.push_back(e);
    e1q.push_back((s1.Q - exact.Q).norm());
    e2q.push_back((s2.Q - exact.Q).norm());
    e1p.push_back((s1.P - exact.P).norm());
    e2p.push_back((s2.P - exact.P).norm());
  }
  CHECK(testutil::loglog_slope(eps, e1q) >= 1.9);
  CHECK(testutil::loglog_slope(eps, e1p) >= 1.9);
  CHECK(testutil::loglog_slope(eps, e2q) >= 2.85);
  CHECK(testutil::loglog_slope(eps, e2p) >= 2.85);
}

TEST_CASE("rotations_series: exact-rank instance agrees with the exact solve") {
  const SubspaceDecomposition dec = random_instance(6, 4, 2, 5, true);
  const Matrix g = testutil::gaussian(6, 4, 6);
  const Matrix dhat = g / g.norm();
  std::vector<double> eps, e2q, e2p;
  for (double e = 1e-2; e >= 0.9e-4; e /= std::sqrt(10.0)) {
    const Matrix delta = e * dhat;
    const Rotations exact = rotations_exact(dec, delta);
    const Rotations s2 = rotations_series(dec, delta, 2);
    eps.push_back(e);
    e2q.push_back((s2.Q - exact.Q).norm());
    e2p.push_back((s2.P - exact.P).norm());
  }
  CHECK(testutil::loglog_slope(eps, e2q) >= 2.85);
  CHECK(testutil::loglog_slope(eps, e2p) >= 2.85);
}

TEST_CASE("coefficient inverse assembles as a rank-1 Kronecker sum") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SubspaceDecomposition dec = random_instance(6, 5, 2, 100 + s, false);
    const int r = dec.r;
    const int m_r = dec.rows() - r;
    const Matrix S1 = dec.sigma1.asDiagonal();
    const Matrix S2 = dec.sigma2_rect();
    const Matrix M = kron(Matrix::Identity(m_r, m_r), S1 * S1) -
                     kron(S2 * S2.transpose(), Matrix::Identity(r, r));
    Matrix D = Matrix::Zero(m_r * r, m_r * r);
    for (int i = 0; i < r; ++i) {
      Matrix Ei = Matrix::Zero(r, r);
      Ei(i, i) = 1.0;
      for (int k = 0; k < m_r; ++k) {
        const double sk = k < dec.sigma2.size() ? dec.sigma2(k) : 0.0;
        const double dik = 1.0 / (dec.sigma1(i) * dec.sigma1(i) - sk * sk);
        Matrix Ek = Matrix::Zero(m_r, m_r);
        Ek(k, k) = 1.0;
        D += dik * kron(Ek, Ei);
      }
    }
    CHECK((D * M - Matrix::Identity(m_r * r, m_r * r)).norm() <= 1e-12 * m_r * r);
    CHECK((D - M.inverse()).norm() <= 1e-12 * D.norm());
  }
}

TEST_CASE("rotated_bases: identity at zero coefficients, orthonormal in general") {
  const SubspaceDecomposition dec = random_instance(6, 5, 3, 7, false);
  Rotations zero;
  zero.Q = Matrix::Zero(3, 3);
  zero.P = Matrix::Zero(2, 3);
  const RotatedBases same = rotated_bases(dec, zero);
  CHECK((same.U1h - dec.U1).norm() <= 1e-14);
  CHECK((same.U2h - dec.U2).norm() <= 1e-14);
  CHECK((same.V1h - dec.V1).norm() <= 1e-14);
  CHECK((same.V2h - dec.V2).norm() <= 1e-14);

  Rotations rot;
  rot.Q = 0.05 * testutil::gaussian(3, 3, 8);
  rot.P = 0.05 * testutil::gaussian(2, 3, 9);
  const RotatedBases b = rotated_bases(dec, rot);
  CHECK((b.U1h.transpose() * b.U1h - Matrix::Identity(3, 3)).norm() <= 1e-12);
  CHECK((b.U2h.transpose() * b.U2h - Matrix::Identity(3, 3)).norm() <= 1e-12);
  CHECK((b.V1h.transpose() * b.V1h - Matrix::Identity(3, 3)).norm() <= 1e-12);
  CHECK((b.V2h.transpose() * b.V2h - Matrix::Identity(2, 2)).norm() <= 1e-12);
  CHECK((b.U1h.transpose() * b.U2h).norm() <= 1e-10);
  CHECK((b.V1h.transpose() * b.V2h).norm() <= 1e-10);
}

TEST_CASE("projector_delta_first_order: structure and remainder order") {
  const SubspaceDecomposition dec = random_instance(5, 4, 2, 10, false);
  Rotations zero;
  zero.Q = Matrix::Zero(3, 2);
  zero.P = Matrix::Zero(2, 2);
  const auto [z_u, z_v] = projector_delta_first_order(dec, zero);
  CHECK(z_u.norm() == 0.0);
  CHECK(z_v.norm() == 0.0);

  const Matrix g = testutil::gaussian(5, 4, 11);
  const Matrix dhat = g / g.norm();
  std::vector<double> eps, rem_u, rem_v;
  for (double e = 1e-2; e >= 0.9e-4; e /= std::sqrt(10.0)) {
    const Matrix delta = e * dhat;
    const Rotations rot = rotations_exact(dec, delta);
    const auto [d_u, d_v] = projector_delta_first_order(dec, rot);
    CHECK((d_u - d_u.transpose()).norm() <= 1e-14);
    CHECK((d_v - d_v.transpose()).norm() <= 1e-14);
    const SubspaceDecomposition dec_t = subspace_decompose(dec.X + delta, dec.r);
    const Matrix exact_u =
        dec_t.U2 * dec_t.U2.transpose() - dec.U2 * dec.U2.transpose();
    const Matrix exact_v =
        dec_t.V2 * dec_t.V2.transpose() - dec.V2 * dec.V2.transpose();
    eps.push_back(e);
    rem_u.push_back((exact_u - d_u).norm());
    rem_v.push_back((exact_v - d_v).norm());
  }
  CHECK(testutil::loglog_slope(eps, rem_u) >= 1.9);
  CHECK(testutil::loglog_slope(eps, rem_v) >= 1.9);
}

TEST_CASE("tsvd_first_order: worked example reference matrices") {
  const Example1Data d = example1_data();
  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  const ExpansionResult res = tsvd_first_order(dec, d.delta);
  CHECK(res.gap_satisfied);
  CHECK((res.base - d.truncation_ref).norm() <= 1e-12);
  CHECK((res.double_sum - d.coupling_ref).norm() <= 1e-12);
  CHECK((res.delta_term - (d.delta - d.proj_delta_ref)).norm() <= 1e-12);
  CHECK((res.approx - d.first_order_ref).norm() <= 1e-12);
  CHECK((res.approx - (res.base + res.delta_term + res.double_sum)).norm() <=
        1e-12 * std::max(1.0, res.approx.norm()));
}

TEST_CASE("tsvd_first_order: grouped evaluation oracle on the repeated block") {
  // With the leading singular value repeated, the double sum groups into
  // unique projector-level factors; both evaluations must agree.
  const Example1Data d = example1_data();
  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  const ExpansionResult res = tsvd_first_order(dec, d.delta);
  const double s1 = 6.0, s3 = 3.0;
  const double a = s3 * s3 / (s1 * s1 - s3 * s3);
  const double b = s1 * s3 / (s1 * s1 - s3 * s3);
  const Matrix grouped =
      a * (d.pu1_ref * d.delta * d.pv2_ref + d.u3u3t_ref * d.delta * d.pv1_ref) +
      b * (d.u12v12t_ref * d.delta.transpose() * d.u3v3t_ref +
           d.u3v3t_ref * d.delta.transpose() * d.u12v12t_ref);
  CHECK((res.double_sum - grouped).norm() <= 1e-12);
}

TEST_CASE("tsvd_first_order: zero perturbation returns the truncation") {
  const SubspaceDecomposition dec = random_instance(5, 4, 2, 12, false);
  const ExpansionResult res = tsvd_first_order(dec, Matrix::Zero(5, 4));
  CHECK((res.approx - dec.truncation()).norm() <= 1e-14);
}

TEST_CASE("tsvd_first_order: exact-rank input has no coupling term") {
  const SubspaceDecomposition dec = random_instance(6, 4, 2, 13, true);
  const Matrix delta = small_delta(dec, 14);
  const ExpansionResult res = tsvd_first_order(dec, delta);
  CHECK(res.double_sum.norm() <= 1e-14);
  const ExpansionResult rr = tsvd_first_order_rank_r(dec, delta);
  CHECK((res.approx - rr.approx).norm() <= 1e-10);
}

TEST_CASE("tsvd_first_order: forced evaluation on the boundary instance") {
  const Example2Data d = example2_data();
  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  CHECK_THROWS_AS(tsvd_first_order(dec, d.delta), GapViolation);
  const ExpansionResult res = tsvd_first_order(dec, d.delta, /*force=*/true);
  CHECK_FALSE(res.gap_satisfied);
  CHECK((res.approx - d.forced_ref).norm() <= 1e-12);
}

TEST_CASE("directional_derivative: matches the first-order correction") {
  const Example1Data d = example1_data();
  const SubspaceDecomposition dec = subspace_decompose(d.X, 2);
  CHECK(directional_derivative(dec, Matrix::Zero(4, 3)).norm() == 0.0);

  const ExpansionResult res = tsvd_first_order(dec, d.delta);
  const Matrix corr = res.approx - res.base;
  CHECK((directional_derivative(dec, d.delta) - corr).norm() <= 1e-12);

  for (std::uint64_t s = 0; s < 100; ++s) {
    const SubspaceDecomposition inst =
        random_instance(5 + s % 2, 4, 2, 300 + s, s % 3 == 0);
    const Matrix delta = small_delta(inst, 400 + s);
    const ExpansionResult e = tsvd_first_order(inst, delta);
    const Matrix c = e.approx - e.base;
    CHECK((directional_derivative(inst, delta) - c).norm() <= 1e-12);
  }
}

TEST_CASE("directional_derivative: finite-difference ground truth") {
  // Independent check that the derivative orientation is right: the
  // remainder of truncate(X + eps*d) - truncate(X) - eps*D must be O(eps^2).
  const SubspaceDecomposition dec = random_instance(6, 5, 2, 23, false);
  const Matrix g = testutil::gaussian(6, 5, 24);
  const Matrix dhat = g / g.norm();
  const Matrix D = directional_derivative(dec, dhat);
  const Matrix base = truncate(dec.X, 2);
  std::vector<double> eps, rem;
  for (double e = 1e-2; e >= 0.9e-4; e /= std::sqrt(10.0)) {
    rem.push_back((truncate(dec.X + e * dhat, 2) - base - e * D).norm());
    eps.push_back(e);
  }
  CHECK(testutil::loglog_slope(eps, rem) >= 1.9);
}

TEST_CASE("directional_derivative: exact-rank closed form") {
  const SubspaceDecomposition dec = random_instance(6, 4, 2, 15, true);
  const Matrix delta = small_delta(dec, 16);
  const ProjectorSet pr = projectors(dec);
  const Matrix want = delta - pr.PU2 * delta * pr.PV2;
  CHECK((directional_derivative(dec, delta) - want).norm() <= 1e-12);
}

TEST_CASE("tsvd_first_order_rank_r: aligned perturbation is exact") {
  const SubspaceDecomposition dec = random_instance(6, 4, 2, 17, true);
  CHECK((tsvd_first_order_rank_r(dec, Matrix::Zero(6, 4)).approx - dec.X).norm() <=
        1e-14);
  const Matrix aligned =
      0.3 * dec.sigma_r() * dec.U1.col(0) * dec.V1.col(0).transpose();
  const ExpansionResult res = tsvd_first_order_rank_r(dec, aligned);
  CHECK((res.approx - (dec.X + aligned)).norm() <= 1e-12);
  CHECK((truncate(dec.X + aligned, 2) - (dec.X + aligned)).norm() <= 1e-10);

  const SubspaceDecomposition general = random_instance(6, 4, 2, 18, false);
  CHECK_THROWS_AS(tsvd_first_order_rank_r(general, Matrix::Zero(6, 4)), NotRankR);
}

TEST_CASE("tsvd_second_order_rank_r: aligned perturbation kills the corrections") {
  const SubspaceDecomposition dec = random_instance(6, 4, 2, 19, true);
  CHECK((tsvd_second_order_rank_r(dec, Matrix::Zero(6, 4)).approx - dec.X).norm() <=
        1e-14);
  const Matrix aligned =
      0.3 * dec.sigma_r() * dec.U1.col(0) * dec.V1.col(0).transpose();
  const ExpansionResult res = tsvd_second_order_rank_r(dec, aligned);
  REQUIRE(res.second_order.has_value());
  CHECK(res.second_order->sum().norm() <= 1e-12);
  CHECK((res.approx - (dec.X + aligned)).norm() <= 1e-12);
}

TEST_CASE("rank-r expansions: residual decay orders") {
  const SubspaceDecomposition dec = random_instance(6, 5, 3, 20, true);
  const Matrix g = testutil::gaussian(6, 5, 21);
  const Matrix dhat = g / g.norm();
  std::vector<double> eps, r1, r2;
  for (double e = 1e-2; e >= 0.9e-4; e /= std::sqrt(10.0)) {
    const Matrix delta = e * dhat;
    const Matrix exact = truncate(dec.X + delta, 3);
    r1.push_back((exact - tsvd_first_order_rank_r(dec, delta).approx).norm());
    r2.push_back((exact - tsvd_second_order_rank_r(dec, delta).approx).norm());
    eps.push_back(e);
  }
  CHECK(testutil::loglog_slope(eps, r1) >= 1.9);
  CHECK(testutil::loglog_slope(eps, r2) >= 2.85);
}

TEST_CASE("tsvd_first_order: invariant under mixing of the repeated block") {
  const Example1Data d = example1_data();
  const SubspaceDecomposition base = subspace_decompose(d.X, 2);
  const ExpansionResult ref = tsvd_first_order(base, d.delta);
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979);
  for (int trial = 0; trial < 25; ++trial) {
    const double t = angle(rng);
    Matrix W(2, 2);
    W << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    if (trial % 2 == 1) W.col(1) = -W.col(1);  // include reflections
    Matrix U = d.U;
    Matrix V = d.V;
    U.leftCols(2) = d.U.leftCols(2) * W;
    V.leftCols(2) = d.V.leftCols(2) * W;
    const SubspaceDecomposition mixed =
        decomposition_from_factors(U, d.sigma, V, 2);
    CHECK((mixed.X - d.X).norm() <= 1e-12);
    const ExpansionResult res = tsvd_first_order(mixed, d.delta);
    CHECK((res.approx - ref.approx).norm() <= 1e-10);
  }
}
