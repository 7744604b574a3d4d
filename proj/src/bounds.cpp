#include "tsvd/bounds.hpp"

#include <cmath>

namespace tsvd {

namespace {

SubspaceDecomposition require_rank_r(const Matrix& X, int r, const char* what) {
  SubspaceDecomposition dec = subspace_decompose(X, r);
  if (!dec.rank_r()) {
    throw NotRankR(std::string(what) + ": X is not rank-r within tolerance");
  }
  return dec;
}

}  // namespace

ResidualReport residual(const Matrix& X, int r, const Matrix& delta) {
  SubspaceDecomposition dec = require_rank_r(X, r, "residual");
  if (delta.rows() != X.rows() || delta.cols() != X.cols()) {
    throw DimensionMismatch("residual: delta shape");
  }
  const Matrix PU2 = dec.U2 * dec.U2.transpose();
  const Matrix PV2 = dec.V2 * dec.V2.transpose();

  SubspaceDecomposition dec_t = subspace_decompose(X + delta, r);
  ResidualReport rep;
  rep.residual = dec_t.truncation() - (X + delta - PU2 * delta * PV2);
  rep.residual_norm = rep.residual.norm();
  rep.sigma_r = dec.sigma_r();
  rep.delta_norm = delta.norm();
  rep.bound_trivial = X.norm() + 2.0 * rep.delta_norm;
  rep.bound_quadratic =
      quadratic_constant() * rep.delta_norm * rep.delta_norm / rep.sigma_r;
  rep.bound_combined =
      combined_constant() * rep.delta_norm *
      std::min(2.0 * rep.delta_norm / rep.sigma_r, 1.0);
  rep.ratio_defined = rep.delta_norm > 0.0;
  rep.ratio = rep.ratio_defined
                  ? rep.sigma_r * rep.residual_norm / (rep.delta_norm * rep.delta_norm)
                  : 0.0;
  rep.nonunique_truncation = dec_t.tie;
  return rep;
}

SecondOrderResidual residual_second_order(const SubspaceDecomposition& dec,
                                          const Matrix& delta) {
  if (!dec.rank_r()) {
    throw NotRankR("residual_second_order: X is not rank-r within tolerance");
  }
  SecondOrderResidual out;
  out.terms = second_order_terms(dec, delta);
  out.sum = out.terms.sum();
  out.norm = std::sqrt(out.terms.pinv_left.squaredNorm() +
                       out.terms.pinv_right.squaredNorm() +
                       out.terms.middle.squaredNorm());
  out.norm_direct = out.sum.norm();
  return out;
}

ProjectorShiftMargins lemma_margins(const Matrix& X, int r, const Matrix& delta) {
  SubspaceDecomposition dec = require_rank_r(X, r, "lemma_margins");
  SubspaceDecomposition dec_t = subspace_decompose(X + delta, r);
  const Matrix PU2 = dec.U2 * dec.U2.transpose();
  const Matrix PV2 = dec.V2 * dec.V2.transpose();
  const Matrix dPU2 = dec_t.U2 * dec_t.U2.transpose() - PU2;
  const Matrix dPV2 = dec_t.V2 * dec_t.V2.transpose() - PV2;

  const double dn = delta.norm();
  ProjectorShiftMargins m;
  m.x_shift_lhs = std::max((dPU2 * X).norm(), (X * dPV2).norm());
  m.x_shift_rhs = 2.0 * dn;
  m.mixed_shift_lhs =
      std::max((PU2 * dPU2 * delta).norm(), (delta * dPV2 * PV2).norm());
  m.mixed_shift_rhs = 2.0 / dec.sigma_r() * dn * dn;
  return m;
}

Matrix extremal_delta_lower(const SubspaceDecomposition& dec, double sigma,
                            double eps) {
  if (!(eps > 0.0) || !(sigma > eps) || !(sigma < dec.sigma_r())) {
    throw ParameterOutOfRange(
        "extremal_delta_lower: need 0 < eps < sigma < sigma_r");
  }
  if (dec.rows() <= dec.r || dec.cols() <= dec.r) {
    throw ParameterOutOfRange("extremal_delta_lower: no residual direction");
  }
  const auto ur = dec.U1.col(dec.r - 1);
  const auto vr = dec.V1.col(dec.r - 1);
  const auto ur1 = dec.U2.col(0);
  const auto vr1 = dec.V2.col(0);
  return (sigma - dec.sigma_r() - eps) * ur * vr.transpose() +
         sigma * ur1 * vr1.transpose();
}

Matrix extremal_delta_asymptotic(const SubspaceDecomposition& dec, double eps) {
  if (!(eps > 0.0)) {
    throw ParameterOutOfRange("extremal_delta_asymptotic: eps must be positive");
  }
  if (dec.rows() <= dec.r || dec.cols() <= dec.r) {
    throw ParameterOutOfRange("extremal_delta_asymptotic: no residual direction");
  }
  const auto ur = dec.U1.col(dec.r - 1);
  const auto vr = dec.V1.col(dec.r - 1);
  const auto ur1 = dec.U2.col(0);
  const auto vr1 = dec.V2.col(0);
  return eps / std::sqrt(3.0) *
         (ur * vr1.transpose() + ur1 * vr.transpose() + ur1 * vr1.transpose());
}

BoundSuiteReport bound_suite(const Matrix& X, int r, const Matrix& delta) {
  BoundSuiteReport rep;
  rep.res = residual(X, r, delta);
  rep.wm = weyl_mirsky_margins(X, delta);
  const double rn = rep.res.residual_norm;
  rep.trivial_ok = rn <= rep.res.bound_trivial + rep.slack;
  rep.quadratic_ok = rn <= rep.res.bound_quadratic + rep.slack;
  rep.combined_ok = rn <= rep.res.bound_combined + rep.slack;
  rep.weyl_ok = rep.wm.weyl_margin() >= -1e-10;
  rep.mirsky_ok = rep.wm.mirsky_margin() >= -1e-10;
  rep.all_ok = rep.trivial_ok && rep.quadratic_ok && rep.combined_ok &&
               rep.weyl_ok && rep.mirsky_ok;
  return rep;
}

}  // namespace tsvd
