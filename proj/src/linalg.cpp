#include "robust_moments/linalg.hpp"

#include <Eigen/Eigenvalues>

namespace robust_moments::linalg {

SymmetricEigen::SymmetricEigen(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  values = solver.eigenvalues();
  vectors = solver.eigenvectors();
}

double SymmetricEigen::max_abs() const {
  return values.size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff();
}

Eigen::VectorXd pinv_solve(const SymmetricEigen& eig, const Eigen::VectorXd& b,
                           double rel_tol) {
  const double cut = rel_tol * eig.max_abs();
  Eigen::VectorXd coords = eig.vectors.transpose() * b;
  for (Eigen::Index i = 0; i < coords.size(); ++i) {
    const double s = eig.values(i);
    coords(i) = (std::abs(s) > cut && s != 0.0) ? coords(i) / s : 0.0;
  }
  return eig.vectors * coords;
}

Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           double rel_tol) {
  return pinv_solve(SymmetricEigen(a), b, rel_tol);
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

}  // namespace robust_moments::linalg
