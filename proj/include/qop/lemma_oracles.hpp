#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "qop/sym_matrix.hpp"

namespace qop {

// Numerically testable forms of the linear-algebra identities used in the
// privacy analysis. All three invert or decompose small dense matrices; d is
// small wherever these run.

// det(A + E) / det(A) = 1 + lambda, lambda the unique nonzero eigenvalue of
// A^{-1} E, for invertible A and rank(E) <= 1.
inline double det_ratio_rank1(const SymMatrix& a, const SymMatrix& e) {
  if (a.dim() != e.dim())
    throw std::invalid_argument("det_ratio_rank1: dimension mismatch");
  Eigen::FullPivLU<Mat> lu(a.mat());
  if (!lu.isInvertible())
    throw std::invalid_argument("det_ratio_rank1: A is singular");
  Eigen::SelfAdjointEigenSolver<Mat> es(e.mat());
  const Vec ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 1.0;  // E = 0
  Eigen::Index top = 0;
  int nonzero = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::fabs(ev(i)) > 1e-12 * scale) {
      ++nonzero;
      top = i;
    }
  }
  if (nonzero > 1)
    throw std::invalid_argument("det_ratio_rank1: rank(E) exceeds 1");
  const Vec v = es.eigenvectors().col(top);
  // E = lambda_E v v^T, so the nonzero eigenvalue of A^{-1}E is
  // lambda_E * v^T A^{-1} v.
  return 1.0 + ev(top) * v.dot(lu.solve(v));
}

// Both sides of det(A + E)/det(A) <= exp(L r / alpha) for lambda_min(A) >=
// alpha > 0, rank(E) <= r, |eigs(E)| <= L.
inline std::pair<double, double> low_rank_det_bound(const SymMatrix& a,
                                                    const SymMatrix& e,
                                                    double alpha, double big_l,
                                                    int r) {
  if (a.dim() != e.dim())
    throw std::invalid_argument("low_rank_det_bound: dimension mismatch");
  if (!(alpha > 0.0))
    throw std::invalid_argument("low_rank_det_bound: requires alpha > 0");
  if (r < 0 || big_l < 0.0)
    throw std::invalid_argument("low_rank_det_bound: requires r, L >= 0");
  Eigen::SelfAdjointEigenSolver<Mat> es_a(a.mat(), Eigen::EigenvaluesOnly);
  const double lam_min = es_a.eigenvalues()(0);
  if (lam_min < alpha * (1.0 - 1e-12) - 1e-12)
    throw std::invalid_argument(
        "low_rank_det_bound: lambda_min(A) below alpha");
  Eigen::SelfAdjointEigenSolver<Mat> es_e(e.mat(), Eigen::EigenvaluesOnly);
  const Vec ev = es_e.eigenvalues();
  int rank = 0;
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double le = std::fabs(ev(i));
    if (le > 1e-12 * scale) ++rank;
    if (le > big_l * (1.0 + 1e-12) + 1e-12)
      throw std::invalid_argument(
          "low_rank_det_bound: an eigenvalue of E exceeds L");
  }
  if (rank > r)
    throw std::invalid_argument("low_rank_det_bound: rank(E) exceeds r");
  const double det_a = Eigen::PartialPivLU<Mat>(a.mat()).determinant();
  const double det_ae =
      Eigen::PartialPivLU<Mat>(Mat(a.mat() + e.mat())).determinant();
  return {det_ae / det_a, std::exp(big_l * r / alpha)};
}

// The rank-2 coupling matrix: given u and b != 0, builds symmetric U with
// rank(U) <= 2, U b = u and ||U||_op = ||u|| / ||b||, via
//   U = (alpha (P_e - P_w) + e w^T + w e^T) / ||b||,
// where e = b/||b||, alpha = e^T u, w = u - alpha e, and P_v is the projector
// onto v (zero when v = 0, which also covers the u parallel to b branch).
inline SymMatrix build_rank2_coupling(const Vec& u, const Vec& b) {
  if (u.size() != b.size())
    throw std::invalid_argument("build_rank2_coupling: dimension mismatch");
  const double nb = b.norm();
  if (nb == 0.0)
    throw std::domain_error("build_rank2_coupling: b must be nonzero");
  const Eigen::Index d = u.size();
  const Vec e = b / nb;
  const double alpha = e.dot(u);
  const Vec w = u - alpha * e;
  const double nw = w.norm();
  Mat m = Mat::Zero(d, d);
  m += alpha * (e * e.transpose());
  // When u is (numerically) parallel to b, w is pure cancellation noise with
  // no orthogonality to e left in it, and P_w would inject an O(alpha) error
  // in a random direction; such w falls under the P_0 = 0 convention.
  if (nw > 1e-13 * std::fabs(alpha)) {
    m -= (alpha / (nw * nw)) * (w * w.transpose());
    m += e * w.transpose() + w * e.transpose();
  }
  m /= nb;
  return SymMatrix::from_upper(m);
}

}  // namespace qop
