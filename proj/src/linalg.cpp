#include "qadmit/linalg.hpp"

#include <stdexcept>
#include <string>

namespace qadmit::linalg {

DenseVector solve(const DenseMatrix& a, const DenseVector& b, double max_residual) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    throw std::invalid_argument("linalg::solve: dimension mismatch");
  }
  if (a.rows() == 0) return DenseVector{};
  Eigen::PartialPivLU<DenseMatrix> lu(a);
  DenseVector x = lu.solve(b);
  const double scale = a.cwiseAbs().maxCoeff() * x.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff();
  const double residual = (a * x - b).cwiseAbs().maxCoeff();
  if (!x.allFinite() || residual > max_residual * std::max(1.0, scale)) {
    throw std::runtime_error("linalg::solve: singular system (residual " + std::to_string(residual) + ")");
  }
  return x;
}

DenseVector stationary(const DenseMatrix& p) {
  const Eigen::Index n = p.rows();
  // (P^T - I) pi = 0 with the last balance equation replaced by normalization.
  DenseMatrix a = p.transpose() - DenseMatrix::Identity(n, n);
  a.row(n - 1).setOnes();
  DenseVector rhs = DenseVector::Zero(n);
  rhs(n - 1) = 1.0;
  DenseVector pi = solve(a, rhs);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pi(i) < 0.0 && pi(i) > -1e-14) pi(i) = 0.0;
  }
  return pi;
}

}  // namespace qadmit::linalg
