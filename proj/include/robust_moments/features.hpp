#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "robust_moments/dataset.hpp"

namespace robust_moments {

struct KernelConfig {
  double gamma = 1.0;

  void validate() const;
};

/// exp(-gamma * ||a - b||^2).
double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  const KernelConfig& cfg);

/// Kernel matrix between the rows of `a` and the rows of `b`.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const KernelConfig& cfg);

/// Per-group and pooled empirical kernel matrices for the representer-form
/// game. `full` is the (N x N) pooled matrix in dataset order; the within-group
/// blocks are its diagonal blocks and the cross blocks are views into it.
struct GroupKernelMatrices {
  std::vector<Eigen::MatrixXd> within;
  Eigen::MatrixXd full;
  std::vector<Index> offsets;
  std::vector<Index> sizes;
  KernelConfig config;
  Eigen::MatrixXd centers;  // pooled covariates, row per sample

  std::size_t num_groups() const { return within.size(); }
  /// Block M_{jj'} (n_j x n_j').
  Eigen::MatrixXd cross(std::size_t j, std::size_t jp) const;
  /// Row block M_j = [M_{j1}, ..., M_{jM}] (n_j x N).
  Eigen::MatrixXd row_block(std::size_t j) const;
};

GroupKernelMatrices build_group_kernels(const GroupedDataset& ds,
                                        const KernelConfig& cfg);

enum class FeatureKind { kExplicitLinear, kNystromRbf };

/// Maps covariates to d-dimensional feature vectors. Immutable after
/// construction.
///
/// Explicit-linear maps are x (optionally with a leading 1). Nystrom maps
/// send x to P k(x) where k(x) = (kappa(x, z_1), ..., kappa(x, z_m)) over the
/// landmarks z and P = D_r^{-1/2} V_r^T from the top-r eigenpairs of the
/// landmark kernel matrix, so that phi(x)^T phi(x') approximates kappa(x, x').
class FeatureMap {
 public:
  static FeatureMap explicit_linear(Index input_dim, bool intercept = false);
  static FeatureMap nystrom(Eigen::MatrixXd landmarks, KernelConfig cfg,
                            Eigen::MatrixXd projection,
                            Eigen::VectorXd eigenvalues);

  FeatureKind kind() const { return kind_; }
  Index dim() const;
  Index input_dim() const { return input_dim_; }
  bool intercept() const { return intercept_; }

  const Eigen::MatrixXd& landmarks() const { return landmarks_; }
  const Eigen::MatrixXd& projection() const { return projection_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const KernelConfig& kernel() const { return kernel_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// Row i of the result is the feature vector of row i of x.
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& x) const;

  bool operator==(const FeatureMap& other) const;

 private:
  FeatureKind kind_ = FeatureKind::kExplicitLinear;
  Index input_dim_ = 1;
  bool intercept_ = false;
  KernelConfig kernel_;
  Eigen::MatrixXd landmarks_;   // m x p
  Eigen::MatrixXd projection_;  // r x m
  Eigen::VectorXd eigenvalues_; // retained, descending
};

inline Eigen::VectorXd apply_features(const FeatureMap& fm,
                                      const Eigen::VectorXd& x) {
  return fm.apply(x);
}

/// Nystrom fit. Landmarks are drawn uniformly without replacement from the
/// pooled samples. Eigenpairs with eigenvalue <= eigen_tol * lambda_max are
/// dropped; if fewer than r survive, r is reduced with a warning.
FeatureMap fit_nystrom(const GroupedDataset& ds, const KernelConfig& cfg,
                       Index m, Index r, std::uint64_t seed,
                       double eigen_tol = 1e-10);

/// Nystrom fit on caller-chosen landmarks (rows of `landmarks`).
FeatureMap fit_nystrom_landmarks(const Eigen::MatrixXd& landmarks,
                                 const KernelConfig& cfg, Index r,
                                 double eigen_tol = 1e-10);

/// Per-group feature matrices Phi_j (n_j x d).
std::vector<Eigen::MatrixXd> group_features(const GroupedDataset& ds,
                                            const FeatureMap& fm);

}  // namespace robust_moments
