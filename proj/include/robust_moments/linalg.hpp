#pragma once

#include <Eigen/Dense>

namespace robust_moments::linalg {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;

  explicit SymmetricEigen(const Eigen::MatrixXd& a);

  double max_abs() const;
};

/// Minimum-norm solution of a x = b for symmetric a: eigenvalues at or below
/// rel_tol * max|eigenvalue| are treated as zero.
Eigen::VectorXd pinv_solve(const SymmetricEigen& eig, const Eigen::VectorXd& b,
                           double rel_tol);
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           double rel_tol);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& a);

}  // namespace robust_moments::linalg
