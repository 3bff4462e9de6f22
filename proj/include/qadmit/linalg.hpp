#pragma once

#include <Eigen/Dense>

namespace qadmit::linalg {

using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

/// Solves A x = b by LU with partial pivoting. Throws std::runtime_error when
/// the relative residual exceeds `max_residual` (numerically singular A).
DenseVector solve(const DenseMatrix& a, const DenseVector& b, double max_residual = 1e-10);

/// Stationary distribution of a row-stochastic matrix with a single closed
/// class: pi P = pi, sum(pi) = 1.
DenseVector stationary(const DenseMatrix& p);

}  // namespace qadmit::linalg
