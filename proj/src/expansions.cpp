#include "tsvd/expansions.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

namespace tsvd {

namespace {

double rank_floor(const SubspaceDecomposition& dec) {
  return kRankTolerance * dec.sigma1(0);
}

void require_gap(const SubspaceDecomposition& dec, const Matrix& delta,
                 const char* what) {
  if (spectral_norm(delta) >= dec.gap() / 2.0) {
    throw GapViolation(std::string(what) + ": ||Delta||_2 >= gap/2");
  }
}

void require_separated_cut(const SubspaceDecomposition& dec, const char* what) {
  if (dec.tie) {
    throw GapViolation(std::string(what) +
                       ": sigma_r == sigma_{r+1}, expansion undefined");
  }
}

Matrix inv_sqrt_psd(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  return es.eigenvectors() *
         es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

// Linear part of the coupled system in vectorized form, acting on
// z = [vec(Q); vec(P)]:  Q A + B P  and  P A^T + B^T Q, with A = Sigma1 + E11
// and B = Sigma2 + E22.
Matrix coupled_operator(const Matrix& A, const Matrix& B, int m_r, int n_r,
                        int r) {
  const int q = m_r * r;
  const int p = n_r * r;
  Matrix M = Matrix::Zero(q + p, q + p);
  M.topLeftCorner(q, q) = kron(A.transpose(), Matrix::Identity(m_r, m_r));
  M.topRightCorner(q, p) = kron(Matrix::Identity(r, r), B);
  M.bottomLeftCorner(p, q) = kron(Matrix::Identity(r, r), B.transpose());
  M.bottomRightCorner(p, p) = kron(A, Matrix::Identity(n_r, n_r));
  return M;
}

Matrix unvec(const Vector& z, int rows, int cols) {
  return Eigen::Map<const Matrix>(z.data(), rows, cols);
}

}  // namespace

EBlocks partition_E(const SubspaceDecomposition& dec, const Matrix& delta) {
  if (delta.rows() != dec.rows() || delta.cols() != dec.cols()) {
    throw DimensionMismatch("partition_E: delta shape");
  }
  return EBlocks{dec.U1.transpose() * delta * dec.V1,
                 dec.U1.transpose() * delta * dec.V2,
                 dec.U2.transpose() * delta * dec.V1,
                 dec.U2.transpose() * delta * dec.V2};
}

double rotation_defect(const SubspaceDecomposition& dec, const EBlocks& e,
                       const Matrix& Q, const Matrix& P) {
  const Matrix A = Matrix(dec.sigma1.asDiagonal()) + e.E11;
  const Matrix B = dec.sigma2_rect() + e.E22;
  const Matrix da = Q * A + B * P + e.E21 + Q * e.E12 * P;
  const Matrix db = A * P.transpose() + Q.transpose() * B - e.E12 -
                    Q.transpose() * e.E21 * P.transpose();
  return std::sqrt(da.squaredNorm() + db.squaredNorm());
}

Rotations rotations_exact(const SubspaceDecomposition& dec, const Matrix& delta,
                          double tol, int max_iter) {
  require_gap(dec, delta, "rotations_exact");
  const EBlocks e = partition_E(dec, delta);
  const int r = dec.r;
  const int m_r = dec.rows() - r;
  const int n_r = dec.cols() - r;
  const Matrix A = Matrix(dec.sigma1.asDiagonal()) + e.E11;
  const Matrix B = dec.sigma2_rect() + e.E22;

  const Matrix M = coupled_operator(A, B, m_r, n_r, r);
  Eigen::ColPivHouseholderQR<Matrix> solver(M);

  Matrix Q = Matrix::Zero(m_r, r);
  Matrix P = Matrix::Zero(n_r, r);
  int iterations = 0;
  double step = 0.0;
  for (int k = 0; k < max_iter; ++k) {
    Vector rhs(m_r * r + n_r * r);
    rhs.head(m_r * r) = vec(-e.E21 - Q * e.E12 * P);
    rhs.tail(n_r * r) = vec(e.E12.transpose() + P * e.E21.transpose() * Q);
    const Vector z = solver.solve(rhs);
    const Matrix Qn = unvec(z.head(m_r * r), m_r, r);
    const Matrix Pn = unvec(z.tail(n_r * r), n_r, r);
    step = (Qn - Q).norm() + (Pn - P).norm();
    Q = Qn;
    P = Pn;
    ++iterations;
    if (step < tol) break;
  }
  Rotations rot{Q, P, RotationMethod::ExactFixedPoint, iterations,
                rotation_defect(dec, e, Q, P)};
  const double scale = std::max(1.0, dec.sigma1(0));
  if (step >= tol && rot.defect > tol * scale) {
    throw NonConvergence("rotations_exact: fixed point did not converge in " +
                         std::to_string(max_iter) + " iterations");
  }
  return rot;
}

Rotations rotations_oracle(const SubspaceDecomposition& dec,
                           const SubspaceDecomposition& dec_tilde) {
  const Matrix align_u = dec.U1.transpose() * dec_tilde.U1;
  const Matrix align_v = dec.V1.transpose() * dec_tilde.V1;
  const double su = Eigen::JacobiSVD<Matrix>(align_u).singularValues().minCoeff();
  const double sv = Eigen::JacobiSVD<Matrix>(align_v).singularValues().minCoeff();
  if (su < 1e-10 || sv < 1e-10) {
    throw SingularAlignment(
        "rotations_oracle: base and perturbed dominant subspaces nearly "
        "orthogonal (gap condition violated in practice)");
  }
  // Q = -(U2^T U~1)(U1^T U~1)^{-1}; solve on the transposed system.
  const Matrix Q =
      -align_u.transpose().partialPivLu()
           .solve((dec.U2.transpose() * dec_tilde.U1).transpose())
           .transpose();
  const Matrix P =
      align_v.transpose().partialPivLu()
          .solve((dec.V2.transpose() * dec_tilde.V1).transpose())
          .transpose();
  const EBlocks e = partition_E(dec, dec_tilde.X - dec.X);
  return Rotations{Q, P, RotationMethod::Oracle, 0,
                   rotation_defect(dec, e, Q, P)};
}

Rotations rotations_series(const SubspaceDecomposition& dec,
                           const Matrix& delta, int order) {
  if (order != 1 && order != 2) {
    throw ParameterOutOfRange("rotations_series: order must be 1 or 2");
  }
  require_gap(dec, delta, "rotations_series");
  const EBlocks e = partition_E(dec, delta);
  const int r = dec.r;
  const int m_r = dec.rows() - r;
  const int n_r = dec.cols() - r;
  const Matrix S1 = dec.sigma1.asDiagonal();
  const Matrix S2 = dec.sigma2_rect();
  const Matrix I_mr = Matrix::Identity(m_r, m_r);
  const Matrix I_nr = Matrix::Identity(n_r, n_r);
  const Matrix I_r = Matrix::Identity(r, r);

  // Vectorized diagonal-plus-correction solve.
  const Matrix phi0 = kron(S1 * S1, I_mr) - kron(I_r, S2 * S2.transpose());
  const Matrix psi0 = kron(S1 * S1, I_nr) - kron(I_r, S2.transpose() * S2);
  const Vector mu1 = -vec(S2 * e.E12.transpose() + e.E21 * S1);
  const Vector tau1 = vec(S2.transpose() * e.E21 + e.E12.transpose() * S1);
  Eigen::PartialPivLU<Matrix> phi0_lu(phi0);
  Eigen::PartialPivLU<Matrix> psi0_lu(psi0);
  Vector vq = phi0_lu.solve(mu1);
  Vector vp = psi0_lu.solve(tau1);
  if (order == 2) {
    const Matrix phi1 = kron(S1 * e.E11.transpose() + e.E11 * S1, I_mr) -
                        kron(I_r, S2 * e.E22.transpose() + e.E22 * S2.transpose());
    const Matrix psi1 = kron(S1 * e.E11 + e.E11.transpose() * S1, I_nr) -
                        kron(I_r, S2.transpose() * e.E22 + e.E22.transpose() * S2);
    const Vector mu2 = -vec(e.E22 * e.E12.transpose() + e.E21 * e.E11.transpose());
    const Vector tau2 = vec(e.E22.transpose() * e.E21 + e.E12.transpose() * e.E11);
    vq += phi0_lu.solve(mu2) - phi0_lu.solve(phi1 * phi0_lu.solve(mu1));
    vp += psi0_lu.solve(tau2) - psi0_lu.solve(psi1 * psi0_lu.solve(tau1));
  }
  Matrix Q = unvec(vq, m_r, r);
  Matrix P = unvec(vp, n_r, r);

  if (dec.rank_r()) {
    // Exact-rank closed forms; the vectorized path must agree.
    const Matrix s1inv = dec.sigma1.cwiseInverse().asDiagonal();
    Matrix Qc = -e.E21 * s1inv;
    Matrix Pc = e.E12.transpose() * s1inv;
    if (order == 2) {
      Qc += -e.E22 * e.E12.transpose() * s1inv * s1inv +
            e.E21 * s1inv * e.E11 * s1inv;
      Pc += e.E22.transpose() * e.E21 * s1inv * s1inv -
            e.E12.transpose() * s1inv * e.E11.transpose() * s1inv;
    }
    const double dq = (Q - Qc).norm();
    const double dp = (P - Pc).norm();
    const double scale = std::max(1.0, std::max(Qc.norm(), Pc.norm()));
    if (dq > 1e-12 * scale || dp > 1e-12 * scale) {
      throw NumericalFailure("rotations_series: closed-form and vectorized "
                             "paths disagree on an exact-rank input");
    }
    Q = Qc;
    P = Pc;
  }
  return Rotations{Q, P,
                   order == 1 ? RotationMethod::Series1 : RotationMethod::Series2,
                   0, rotation_defect(dec, e, Q, P)};
}

RotatedBases rotated_bases(const SubspaceDecomposition& dec,
                           const Rotations& rot) {
  if (!rot.Q.allFinite() || !rot.P.allFinite()) {
    throw NumericalFailure("rotated_bases: non-finite rotation coefficients");
  }
  const Matrix& Q = rot.Q;
  const Matrix& P = rot.P;
  const int r = dec.r;
  const Matrix I_r = Matrix::Identity(r, r);
  const Matrix I_mr = Matrix::Identity(Q.rows(), Q.rows());
  const Matrix I_nr = Matrix::Identity(P.rows(), P.rows());
  RotatedBases b;
  b.U1h = (dec.U1 - dec.U2 * Q) * inv_sqrt_psd(I_r + Q.transpose() * Q);
  b.U2h = (dec.U2 + dec.U1 * Q.transpose()) * inv_sqrt_psd(I_mr + Q * Q.transpose());
  b.V1h = (dec.V1 + dec.V2 * P) * inv_sqrt_psd(I_r + P.transpose() * P);
  b.V2h = (dec.V2 - dec.V1 * P.transpose()) * inv_sqrt_psd(I_nr + P * P.transpose());
  return b;
}

std::pair<Matrix, Matrix> projector_delta_first_order(
    const SubspaceDecomposition& dec, const Rotations& rot) {
  Matrix dPU2 = dec.U1 * rot.Q.transpose() * dec.U2.transpose() +
                dec.U2 * rot.Q * dec.U1.transpose();
  Matrix dPV2 = -dec.V1 * rot.P.transpose() * dec.V2.transpose() -
                dec.V2 * rot.P * dec.V1.transpose();
  return {std::move(dPU2), std::move(dPV2)};
}

SecondOrderTerms second_order_terms(const SubspaceDecomposition& dec,
                                    const Matrix& delta) {
  const Matrix pinv = pinv_rank_r(dec);
  const Matrix PU2 = dec.U2 * dec.U2.transpose();
  const Matrix PV2 = dec.V2 * dec.V2.transpose();
  const Matrix mid = PU2 * delta * PV2;
  SecondOrderTerms t;
  t.pinv_left = pinv * delta.transpose() * mid;
  t.pinv_right = mid * delta.transpose() * pinv;
  t.middle = PU2 * delta * pinv.transpose() * delta * PV2;
  return t;
}

ExpansionResult tsvd_first_order(const SubspaceDecomposition& dec,
                                 const Matrix& delta, bool force) {
  if (delta.rows() != dec.rows() || delta.cols() != dec.cols()) {
    throw DimensionMismatch("tsvd_first_order: delta shape");
  }
  require_separated_cut(dec, "tsvd_first_order");
  const bool satisfied = spectral_norm(delta) < dec.gap() / 2.0;
  if (!satisfied && !force) {
    throw GapViolation("tsvd_first_order: gap condition violated (use force "
                       "to evaluate anyway)");
  }

  const Matrix PU2 = dec.U2 * dec.U2.transpose();
  const Matrix PV2 = dec.V2 * dec.V2.transpose();

  const double floor = rank_floor(dec);
  Matrix G = Matrix::Zero(dec.rows(), dec.cols());
  for (int i = 0; i < dec.r; ++i) {
    const double si = dec.sigma1(i);
    for (int j = 0; j < dec.sigma2.size(); ++j) {
      const double sj = dec.sigma2(j);
      if (sj <= floor) continue;  // zero singular values contribute nothing
      const double denom = si * si - sj * sj;
      const double a = sj * sj / denom;
      const double b = si * sj / denom;
      const auto ui = dec.U1.col(i);
      const auto vi = dec.V1.col(i);
      const auto uj = dec.U2.col(j);
      const auto vj = dec.V2.col(j);
      const double alpha = ui.dot(delta * vj);
      const double beta = uj.dot(delta * vi);
      G += (a * alpha + b * beta) * ui * vj.transpose() +
           (a * beta + b * alpha) * uj * vi.transpose();
    }
  }

  ExpansionResult res;
  res.order = 1;
  res.base = dec.truncation();
  res.delta_term = delta - PU2 * delta * PV2;
  res.double_sum = G;
  res.approx = res.base + res.delta_term + res.double_sum;
  res.gap_satisfied = satisfied;
  return res;
}

Matrix directional_derivative(const SubspaceDecomposition& dec,
                              const Matrix& delta) {
  if (delta.rows() != dec.rows() || delta.cols() != dec.cols()) {
    throw DimensionMismatch("directional_derivative: delta shape");
  }
  require_separated_cut(dec, "directional_derivative");

  const Matrix PU1 = dec.U1 * dec.U1.transpose();
  const Matrix PU2 = dec.U2 * dec.U2.transpose();
  const Matrix PV1 = dec.V1 * dec.V1.transpose();
  Matrix D = PU2 * delta * PV1 + PU1 * delta;

  const double floor = rank_floor(dec);
  // Left-vector index runs over the whole complement; ghost singular values
  // vanish together with their coefficients.
  for (int i = 0; i < dec.r; ++i) {
    const double si = dec.sigma1(i);
    for (int j = 0; j < dec.sigma2.size(); ++j) {
      const double sj = dec.sigma2(j);
      if (sj <= floor) continue;
      const double c = sj / (si * si - sj * sj);
      const auto ui = dec.U1.col(i);
      const auto vi = dec.V1.col(i);
      const auto uj = dec.U2.col(j);
      const auto vj = dec.V2.col(j);
      const double alpha = ui.dot(delta * vj);
      const double beta = uj.dot(delta * vi);
      D += c * (sj * beta + si * alpha) * uj * vi.transpose() +
           c * (si * beta + sj * alpha) * ui * vj.transpose();
    }
  }
  return D;
}

ExpansionResult tsvd_first_order_rank_r(const SubspaceDecomposition& dec,
                                        const Matrix& delta, bool force) {
  if (delta.rows() != dec.rows() || delta.cols() != dec.cols()) {
    throw DimensionMismatch("tsvd_first_order_rank_r: delta shape");
  }
  if (!dec.rank_r()) {
    throw NotRankR("tsvd_first_order_rank_r: sigma2 not all zero");
  }
  const bool satisfied = spectral_norm(delta) < dec.sigma_r() / 2.0;
  if (!satisfied && !force) {
    throw GapViolation("tsvd_first_order_rank_r: ||Delta||_2 >= sigma_r/2 "
                       "(use force to evaluate anyway)");
  }
  const Matrix PU2 = dec.U2 * dec.U2.transpose();
  const Matrix PV2 = dec.V2 * dec.V2.transpose();
  ExpansionResult res;
  res.order = 1;
  res.base = dec.X;
  res.delta_term = delta - PU2 * delta * PV2;
  res.double_sum = Matrix::Zero(dec.rows(), dec.cols());
  res.approx = res.base + res.delta_term;
  res.gap_satisfied = satisfied;
  return res;
}

ExpansionResult tsvd_second_order_rank_r(const SubspaceDecomposition& dec,
                                         const Matrix& delta, bool force) {
  ExpansionResult res = tsvd_first_order_rank_r(dec, delta, force);
  res.order = 2;
  res.second_order = second_order_terms(dec, delta);
  res.approx += res.second_order->sum();
  return res;
}

}  // namespace tsvd
