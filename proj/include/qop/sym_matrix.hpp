#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace qop {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Dense symmetric matrix. Symmetry is enforced at construction by mirroring
// the upper triangle, so entries(i, j) == entries(j, i) holds exactly and all
// entries are finite.
class SymMatrix {
 public:
  explicit SymMatrix(Eigen::Index dim) : m_(Mat::Zero(dim, dim)) {
    if (dim < 1) throw std::invalid_argument("SymMatrix: dimension must be >= 1");
  }

  static SymMatrix from_upper(const Mat& m) {
    if (m.rows() != m.cols())
      throw std::invalid_argument("SymMatrix: matrix must be square");
    SymMatrix out(m.rows());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i <= j; ++i) out.m_(i, j) = out.m_(j, i) = m(i, j);
    if (!out.m_.allFinite())
      throw std::invalid_argument("SymMatrix: entries must be finite");
    return out;
  }

  static SymMatrix identity(Eigen::Index dim) {
    return from_upper(Mat::Identity(dim, dim));
  }

  static SymMatrix diagonal(const Vec& d) {
    return from_upper(Mat(d.asDiagonal()));
  }

  Eigen::Index dim() const { return m_.rows(); }
  const Mat& mat() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Mat m_;
};

}  // namespace qop
