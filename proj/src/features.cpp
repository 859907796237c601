#include "robust_moments/features.hpp"

#include <cmath>
#include <string>

#include "robust_moments/common.hpp"
#include "robust_moments/linalg.hpp"
#include "robust_moments/rng.hpp"

namespace robust_moments {

void KernelConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ValidationError("kernel gamma must be a positive finite number");
  }
}

double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  const KernelConfig& cfg) {
  if (a.size() != b.size()) {
    throw ValidationError("rbf_kernel: dimension mismatch (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  cfg.validate();
  return std::exp(-cfg.gamma * (a - b).squaredNorm());
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const KernelConfig& cfg) {
  if (a.cols() != b.cols()) throw ValidationError("kernel_matrix: dimension mismatch");
  // ||a_i - b_k||^2 = |a_i|^2 + |b_k|^2 - 2 a_i.b_k, clamped at 0.
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * a * b.transpose();
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return (-cfg.gamma * d2.cwiseMax(0.0)).array().exp().matrix();
}

Eigen::MatrixXd GroupKernelMatrices::cross(std::size_t j, std::size_t jp) const {
  return full.block(offsets.at(j), offsets.at(jp), sizes.at(j), sizes.at(jp));
}

Eigen::MatrixXd GroupKernelMatrices::row_block(std::size_t j) const {
  return full.middleRows(offsets.at(j), sizes.at(j));
}

GroupKernelMatrices build_group_kernels(const GroupedDataset& ds,
                                        const KernelConfig& cfg) {
  cfg.validate();
  GroupKernelMatrices km;
  km.config = cfg;
  km.centers = ds.pooled_covariates();
  km.full = linalg::symmetrize(kernel_matrix(km.centers, km.centers, cfg));
  for (std::size_t j = 0; j < ds.num_groups(); ++j) {
    km.offsets.push_back(ds.offset(j));
    km.sizes.push_back(ds.group(j).size());
    km.within.push_back(km.full.block(ds.offset(j), ds.offset(j),
                                      ds.group(j).size(), ds.group(j).size()));
  }
  return km;
}

FeatureMap FeatureMap::explicit_linear(Index input_dim, bool intercept) {
  if (input_dim < 1) throw ValidationError("feature map input dimension must be >= 1");
  FeatureMap fm;
  fm.kind_ = FeatureKind::kExplicitLinear;
  fm.input_dim_ = input_dim;
  fm.intercept_ = intercept;
  return fm;
}

FeatureMap FeatureMap::nystrom(Eigen::MatrixXd landmarks, KernelConfig cfg,
                               Eigen::MatrixXd projection,
                               Eigen::VectorXd eigenvalues) {
  cfg.validate();
  if (landmarks.rows() < 1 || landmarks.cols() < 1) {
    throw ValidationError("nystrom map needs at least one landmark");
  }
  if (projection.rows() < 1 || projection.cols() != landmarks.rows()) {
    throw ValidationError("nystrom projection shape does not match landmarks");
  }
  if (eigenvalues.size() != projection.rows() || (eigenvalues.array() <= 0.0).any()) {
    throw ValidationError("nystrom eigenvalues must be positive, one per feature");
  }
  FeatureMap fm;
  fm.kind_ = FeatureKind::kNystromRbf;
  fm.input_dim_ = landmarks.cols();
  fm.kernel_ = cfg;
  fm.landmarks_ = std::move(landmarks);
  fm.projection_ = std::move(projection);
  fm.eigenvalues_ = std::move(eigenvalues);
  return fm;
}

Index FeatureMap::dim() const {
  if (kind_ == FeatureKind::kNystromRbf) return projection_.rows();
  return input_dim_ + (intercept_ ? 1 : 0);
}

Eigen::VectorXd FeatureMap::apply(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim_) {
    throw ValidationError("apply_features: expected covariate of dimension " +
                          std::to_string(input_dim_) + ", got " +
                          std::to_string(x.size()));
  }
  if (kind_ == FeatureKind::kExplicitLinear) {
    if (!intercept_) return x;
    Eigen::VectorXd out(x.size() + 1);
    out << 1.0, x;
    return out;
  }
  // Same arithmetic path as apply_rows so single and batched evaluation agree
  // bit for bit.
  return apply_rows(x.transpose()).row(0).transpose();
}

Eigen::MatrixXd FeatureMap::apply_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim_) {
    throw ValidationError("apply_features: covariate dimension mismatch");
  }
  if (kind_ == FeatureKind::kExplicitLinear) {
    if (!intercept_) return x;
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
  }
  return kernel_matrix(x, landmarks_, kernel_) * projection_.transpose();
}

bool FeatureMap::operator==(const FeatureMap& other) const {
  if (kind_ != other.kind_ || input_dim_ != other.input_dim_) return false;
  if (kind_ == FeatureKind::kExplicitLinear) return intercept_ == other.intercept_;
  return kernel_.gamma == other.kernel_.gamma &&
         landmarks_.rows() == other.landmarks_.rows() &&
         projection_.rows() == other.projection_.rows() &&
         landmarks_ == other.landmarks_ && projection_ == other.projection_ &&
         eigenvalues_ == other.eigenvalues_;
}

FeatureMap fit_nystrom_landmarks(const Eigen::MatrixXd& landmarks,
                                 const KernelConfig& cfg, Index r,
                                 double eigen_tol) {
  cfg.validate();
  const Index m = landmarks.rows();
  if (r < 1 || r > m) {
    throw ValidationError("nystrom: need 1 <= r <= m (r=" + std::to_string(r) +
                          ", m=" + std::to_string(m) + ")");
  }
  const Eigen::MatrixXd khat =
      linalg::symmetrize(kernel_matrix(landmarks, landmarks, cfg));
  const linalg::SymmetricEigen eig(khat);
  const double lambda_max = eig.values(m - 1);
  const double cut = eigen_tol * lambda_max;
  Index kept = 0;
  while (kept < r && eig.values(m - 1 - kept) > cut) ++kept;
  if (kept < r) {
    warn("nystrom: only " + std::to_string(kept) + " of the requested " +
         std::to_string(r) + " eigenvalues exceed the tolerance; rank reduced to " +
         std::to_string(kept));
  }
  if (kept == 0) throw ValidationError("nystrom: landmark kernel matrix has no positive eigenvalue");
  Eigen::VectorXd values(kept);
  Eigen::MatrixXd projection(kept, m);
  for (Index i = 0; i < kept; ++i) {
    const Index src = m - 1 - i;  // descending order
    values(i) = eig.values(src);
    projection.row(i) = eig.vectors.col(src).transpose() / std::sqrt(values(i));
  }
  return FeatureMap::nystrom(landmarks, cfg, std::move(projection), std::move(values));
}

FeatureMap fit_nystrom(const GroupedDataset& ds, const KernelConfig& cfg,
                       Index m, Index r, std::uint64_t seed, double eigen_tol) {
  const Index total = ds.total_size();
  if (m < 1 || m > total) {
    throw ValidationError("nystrom: landmark count m=" + std::to_string(m) +
                          " must be in [1, " + std::to_string(total) + "]");
  }
  if (r < 1 || r > m) throw ValidationError("nystrom: need 1 <= r <= m");
  const Eigen::MatrixXd pooled = ds.pooled_covariates();
  Rng rng(seed);
  const auto picks = rng.sample_without_replacement(static_cast<std::size_t>(total),
                                                    static_cast<std::size_t>(m));
  Eigen::MatrixXd landmarks(m, pooled.cols());
  for (Index i = 0; i < m; ++i) {
    landmarks.row(i) = pooled.row(static_cast<Index>(picks[static_cast<std::size_t>(i)]));
  }
  return fit_nystrom_landmarks(landmarks, cfg, r, eigen_tol);
}

std::vector<Eigen::MatrixXd> group_features(const GroupedDataset& ds,
                                            const FeatureMap& fm) {
  std::vector<Eigen::MatrixXd> out(ds.num_groups());
  parallel_for(ds.num_groups(),
               [&](std::size_t j) { out[j] = fm.apply_rows(ds.group(j).x); });
  return out;
}

}  // namespace robust_moments
