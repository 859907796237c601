#include <doctest.h>

#include <cmath>

#include "robust_moments/common.hpp"
#include "robust_moments/features.hpp"
#include "support.hpp"

using namespace robust_moments;
using test_support::random_matrix;

namespace {

GroupedDataset dataset_from_rows(const Eigen::MatrixXd& x, Index groups) {
  std::vector<Group> out;
  const Index per = x.rows() / groups;
  for (Index j = 0; j < groups; ++j) {
    out.push_back({x.middleRows(j * per, per), Eigen::VectorXd::Zero(per)});
  }
  return GroupedDataset(std::move(out));
}

}  // namespace

TEST_CASE("rbf kernel values") {
  const KernelConfig cfg{1.0};
  Eigen::VectorXd a(2), b(2);
  a << 0.3, -1.2;
  CHECK(rbf_kernel(a, a, cfg) == 1.0);
  b << 1.3, -1.2;
  CHECK(rbf_kernel(a, b, cfg) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(rbf_kernel(a, b, cfg) == doctest::Approx(0.367879).epsilon(1e-6));
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd u = test_support::random_vector(rng, 3);
    const Eigen::VectorXd v = test_support::random_vector(rng, 3);
    CHECK(rbf_kernel(u, v, cfg) == rbf_kernel(v, u, cfg));
    CHECK(rbf_kernel(u, v, cfg) > 0.0);
    CHECK(rbf_kernel(u, v, cfg) <= 1.0);
  }
  CHECK_THROWS_AS(rbf_kernel(a, Eigen::VectorXd::Zero(3), cfg), ValidationError);
  CHECK_THROWS_AS(rbf_kernel(a, b, KernelConfig{0.0}), ValidationError);
}

TEST_CASE("group kernel matrices") {
  const KernelConfig cfg{0.7};
  SUBCASE("single sample") {
    const GroupedDataset ds({Group{Eigen::MatrixXd::Constant(1, 1, 0.4), Eigen::VectorXd::Ones(1)}});
    const auto km = build_group_kernels(ds, cfg);
    REQUIRE(km.within.size() == 1);
    CHECK(km.within[0].rows() == 1);
    CHECK(km.within[0](0, 0) == 1.0);
  }
  SUBCASE("duplicate rows give duplicate rows and columns") {
    Eigen::MatrixXd x(3, 1);
    x << 0.1, 0.5, 0.1;
    const GroupedDataset ds({Group{x, Eigen::VectorXd::Zero(3)}});
    const auto km = build_group_kernels(ds, cfg);
    CHECK(km.within[0].row(0) == km.within[0].row(2));
    CHECK(km.within[0].col(0) == km.within[0].col(2));
  }
  SUBCASE("diagonal blocks of the full matrix") {
    Rng rng(9);
    const GroupedDataset ds = dataset_from_rows(random_matrix(rng, 10, 2), 2);
    const auto km = build_group_kernels(ds, cfg);
    CHECK(km.full.rows() == 10);
    CHECK(km.full.block(0, 0, 5, 5) == km.within[0]);
    CHECK(km.full.block(5, 5, 5, 5) == km.within[1]);
    CHECK(km.cross(0, 1) == km.full.block(0, 5, 5, 5));
    CHECK(km.row_block(1) == km.full.middleRows(5, 5));
    CHECK((km.full - km.full.transpose()).norm() == 0.0);
  }
}

TEST_CASE("explicit linear features") {
  const FeatureMap id = FeatureMap::explicit_linear(3);
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  CHECK(id.dim() == 3);
  CHECK(apply_features(id, x) == x);
  const FeatureMap with_const = FeatureMap::explicit_linear(3, true);
  CHECK(with_const.dim() == 4);
  CHECK(with_const.apply(x)(0) == 1.0);
  CHECK(with_const.apply(x).tail(3) == x);
  CHECK_THROWS_AS(id.apply(Eigen::VectorXd::Zero(2)), ValidationError);
}

TEST_CASE("nystrom with all points as landmarks reproduces the kernel") {
  // Jittered lattice keeps the kernel matrix well conditioned.
  Rng rng(13);
  Eigen::MatrixXd x(36, 2);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      x(6 * i + j, 0) = i + 0.1 * rng.uniform();
      x(6 * i + j, 1) = j + 0.1 * rng.uniform();
    }
  }
  const KernelConfig cfg{1.0};
  const FeatureMap fm = fit_nystrom_landmarks(x, cfg, 36);
  REQUIRE(fm.dim() == 36);
  const Eigen::MatrixXd phi = fm.apply_rows(x);
  const Eigen::MatrixXd k = kernel_matrix(x, x, cfg);
  CHECK((k - phi * phi.transpose()).norm() / k.norm() <= 1e-6);
}

TEST_CASE("nystrom feature at a landmark is the projected kernel column") {
  Rng rng(21);
  const Eigen::MatrixXd z = random_matrix(rng, 8, 2);
  const KernelConfig cfg{0.5};
  const FeatureMap fm = fit_nystrom_landmarks(z, cfg, 5);
  for (Index i = 0; i < z.rows(); ++i) {
    const Eigen::VectorXd col = kernel_matrix(z, z.row(i), cfg).col(0);
    const Eigen::VectorXd expected = fm.projection() * col;
    CHECK((fm.apply(z.row(i).transpose()) - expected).norm() <= 1e-12);
  }
  const Eigen::VectorXd probe = z.row(3).transpose();
  CHECK(fm.apply(probe) == fm.apply(probe));
}

TEST_CASE("rank one nystrom on identical points gives identical features") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(6, 1, 0.25);
  const GroupedDataset ds = dataset_from_rows(x, 2);
  const FeatureMap fm = fit_nystrom(ds, KernelConfig{1.0}, 4, 1, 3);
  CHECK(fm.dim() == 1);
  const Eigen::MatrixXd phi = fm.apply_rows(x);
  CHECK((phi.array() - phi(0, 0)).abs().maxCoeff() == 0.0);
  CHECK(phi(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("nystrom error matches an independent dense oracle") {
  Rng rng(2024);
  const Eigen::MatrixXd x = random_matrix(rng, 200, 2);
  const GroupedDataset ds = dataset_from_rows(x, 4);
  const KernelConfig cfg{0.3};
  const FeatureMap fm = fit_nystrom(ds, cfg, 100, 100, 17);
  const Eigen::MatrixXd k = kernel_matrix(x, x, cfg);
  const Eigen::MatrixXd phi = fm.apply_rows(x);
  const double err = (k - phi * phi.transpose()).norm() / k.norm();

  // Oracle 1: the same landmarks through an SVD pseudo-inverse with the same
  // relative cut.
  const Eigen::MatrixXd z = fm.landmarks();
  const Eigen::MatrixXd kzz = kernel_matrix(z, z, cfg);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(kzz, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cut = 1e-10 * svd.singularValues()(0);
  Eigen::VectorXd inv = svd.singularValues();
  for (Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) > cut ? 1.0 / inv(i) : 0.0;
  const Eigen::MatrixXd pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  const Eigen::MatrixXd kxz = kernel_matrix(x, z, cfg);
  const double oracle = (k - kxz * pinv * kxz.transpose()).norm() / k.norm();
  CHECK(err <= oracle + 1e-6);

  // Oracle 2: no rank-r approximation beats the truncated eigendecomposition.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  const Eigen::VectorXd ev = es.eigenvalues();  // ascending
  const double best = std::sqrt(ev.head(ev.size() - fm.dim()).squaredNorm()) / k.norm();
  CHECK(err >= best - 1e-9);
  CHECK(err <= 1e-3);
}

TEST_CASE("nystrom preconditions and determinism") {
  Rng rng(4);
  const GroupedDataset ds = dataset_from_rows(random_matrix(rng, 20, 1), 2);
  CHECK_THROWS(fit_nystrom(ds, KernelConfig{1.0}, 21, 5, 1));
  CHECK_THROWS(fit_nystrom(ds, KernelConfig{1.0}, 10, 11, 1));
  const FeatureMap a = fit_nystrom(ds, KernelConfig{1.0}, 10, 10, 99);
  const FeatureMap b = fit_nystrom(ds, KernelConfig{1.0}, 10, 10, 99);
  CHECK(a == b);
  const auto feats = group_features(ds, a);
  REQUIRE(feats.size() == 2);
  CHECK(feats[0].rows() == 10);
  CHECK(feats[0].cols() == a.dim());
}
