#include <doctest.h>

#include <cmath>

#include "robust_moments/common.hpp"
#include "robust_moments/evaluation.hpp"
#include "robust_moments/linalg.hpp"
#include "robust_moments/moment_game.hpp"
#include "support.hpp"

using namespace robust_moments;
using test_support::random_matrix;
using test_support::random_vector;

namespace {

GameCoefficients random_game(Rng& rng, int groups, int n, int d, const CoefficientOptions& opts) {
  std::vector<Eigen::MatrixXd> phi;
  std::vector<Eigen::VectorXd> y;
  for (int j = 0; j < groups; ++j) {
    phi.push_back(random_matrix(rng, n, d));
    y.push_back(random_vector(rng, n));
  }
  return build_linear_coefficients(phi, y, opts);
}

double weighted(const GameCoefficients& gc, const Eigen::VectorXd& w, const Eigen::VectorXd& a) {
  return gc.weighted_objective(w, a);
}

}  // namespace

TEST_CASE("identity features, lambda 0.5") {
  CoefficientOptions opts;
  opts.lambda = 0.5;
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  const auto gc = build_linear_coefficients({Eigen::MatrixXd::Identity(2, 2)}, {y}, opts);
  const GroupCoefficients& g = gc.groups[0];
  CHECK(g.kappa == doctest::Approx(0.5));
  CHECK(g.nu(0) == doctest::Approx(0.5));
  CHECK(g.nu(1) == doctest::Approx(0.0));
  CHECK((g.sigma - 0.5 * Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-14);
  CHECK(g.n == 2);
}

TEST_CASE("zero labels give zero kappa and nu") {
  Rng rng(1);
  CoefficientOptions opts;
  opts.lambda = 0.1;
  const auto gc = build_linear_coefficients({random_matrix(rng, 5, 3), random_matrix(rng, 4, 3)},
                                            {Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(4)},
                                            opts);
  for (const auto& g : gc.groups) {
    CHECK(g.kappa == 0.0);
    CHECK(g.nu.norm() == 0.0);
  }
}

TEST_CASE("linear coefficients match a direct inner maximization") {
  Rng rng(77);
  CoefficientOptions opts;
  opts.lambda = 0.1;
  opts.mu = 0.01;
  const Eigen::MatrixXd phi = random_matrix(rng, 4, 2);
  const Eigen::VectorXd y = random_vector(rng, 4);
  const auto gc = build_linear_coefficients({phi}, {y}, opts);
  const double n = 4.0;
  const Eigen::MatrixXd g = phi.transpose() * phi;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd alpha = random_vector(rng, 2);
    const Eigen::VectorXd rhs = phi.transpose() * y - g * alpha;
    const Eigen::VectorXd beta =
        (g + n * opts.lambda * Eigen::MatrixXd::Identity(2, 2)).partialPivLu().solve(rhs);
    const double direct =
        (2.0 * y.dot(phi * beta) - 2.0 * alpha.dot(g * beta) - beta.dot(g * beta)) / n -
        opts.lambda * beta.squaredNorm() + opts.mu * alpha.squaredNorm();
    CHECK(gc.group_objective(0, alpha) == doctest::Approx(direct).epsilon(1e-10));
    // The first-order point is a maximum: perturbations do not increase it.
    const Eigen::VectorXd db = 1e-3 * random_vector(rng, 2);
    const Eigen::VectorXd b2 = beta + db;
    const double perturbed =
        (2.0 * y.dot(phi * b2) - 2.0 * alpha.dot(g * b2) - b2.dot(g * b2)) / n -
        opts.lambda * b2.squaredNorm() + opts.mu * alpha.squaredNorm();
    CHECK(perturbed <= direct + 1e-15);
  }
}

TEST_CASE("coefficient invariants on random instances") {
  Rng rng(3);
  for (double lambda : {0.0, 0.01, 1.0}) {
    CoefficientOptions opts;
    opts.lambda = lambda;
    opts.mu = 0.05;
    const auto gc = random_game(rng, 3, 6, 4, opts);
    for (const auto& g : gc.groups) {
      CHECK((g.sigma - g.sigma.transpose()).norm() <= 1e-12);
      CHECK(linalg::min_eigenvalue(g.sigma) >= -1e-8);
      CHECK(g.kappa >= -1e-12);
    }
    // g_j >= mu ||alpha||^2 since the adversary can always play beta = 0.
    const Eigen::VectorXd alpha = random_vector(rng, 4);
    const Eigen::VectorXd obj = gc.group_objectives(alpha);
    CHECK(obj.minCoeff() >= opts.mu * alpha.squaredNorm() - 1e-10);
  }
}

TEST_CASE("singular gram with lambda 0 warns and adds jitter") {
  std::vector<std::string> warnings;
  set_warning_handler([&](std::string_view m) { warnings.emplace_back(m); });
  Eigen::MatrixXd phi(3, 2);
  phi << 1, 1, 2, 2, 3, 3;
  const auto gc = build_linear_coefficients({phi}, {Eigen::VectorXd::Ones(3)}, CoefficientOptions{});
  set_warning_handler(nullptr);
  CHECK_FALSE(warnings.empty());
  CHECK(std::isfinite(gc.groups[0].kappa));
}

TEST_CASE("rkhs coefficients, single sample") {
  for (double mu : {0.0, 0.3}) {
    CoefficientOptions opts;
    opts.lambda = 1.0;
    opts.mu = mu;
    const GroupedDataset ds({Group{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1)}});
    const auto km = build_group_kernels(ds, KernelConfig{1.0});
    const auto gc = build_rkhs_coefficients(km, group_labels(ds), opts);
    CHECK(gc.groups[0].kappa == doctest::Approx(0.5));
    CHECK(gc.groups[0].nu(0) == doctest::Approx(0.5));
    CHECK(gc.groups[0].sigma(0, 0) == doctest::Approx(0.5 + mu));
  }
}

TEST_CASE("rkhs coefficients need lambda > 0 and vanish for zero labels") {
  Rng rng(8);
  std::vector<Group> groups;
  for (int j = 0; j < 2; ++j) groups.push_back({random_matrix(rng, 3, 1), Eigen::VectorXd::Zero(3)});
  const GroupedDataset ds(groups);
  const auto km = build_group_kernels(ds, KernelConfig{1.0});
  CHECK_THROWS(build_rkhs_coefficients(km, group_labels(ds), CoefficientOptions{}));
  CoefficientOptions opts;
  opts.lambda = 0.2;
  const auto gc = build_rkhs_coefficients(km, group_labels(ds), opts);
  CHECK(gc.dim() == 6);
  for (const auto& g : gc.groups) {
    CHECK(g.kappa == 0.0);
    CHECK(g.nu.norm() == 0.0);
  }
}

TEST_CASE("rkhs moment violation agrees with a grid search over test functions") {
  Rng rng(31);
  std::vector<Group> groups;
  for (int j = 0; j < 2; ++j) groups.push_back({random_matrix(rng, 3, 1), random_vector(rng, 3)});
  const GroupedDataset ds(groups);
  const KernelConfig cfg{1.0};
  const auto km = build_group_kernels(ds, cfg);
  CoefficientOptions opts;
  opts.lambda = 0.1;
  const auto gc = build_rkhs_coefficients(km, group_labels(ds), opts);
  const Eigen::VectorXd alpha = random_vector(rng, 6);
  const double n = 3.0;
  for (std::size_t j = 0; j < 2; ++j) {
    const Eigen::MatrixXd& k = km.within[j];
    const Eigen::VectorXd rho = ds.group(j).y - km.row_block(j) * alpha;
    // Test functions f = K_j beta; objective (1/n)(2 rho^T f - |f|^2) - lambda beta^T K beta.
    auto value = [&](const Eigen::VectorXd& beta) {
      const Eigen::VectorXd f = k * beta;
      return (2.0 * rho.dot(f) - f.squaredNorm()) / n - opts.lambda * beta.dot(k * beta);
    };
    const Eigen::VectorXd best =
        (k + n * opts.lambda * Eigen::MatrixXd::Identity(3, 3)).ldlt().solve(rho);
    const Eigen::VectorXd dir1 = best;
    const Eigen::VectorXd dir2 = random_vector(rng, 3);
    double grid_max = -1e300;
    const int steps = 200;
    for (int a = 0; a < steps; ++a) {
      for (int b = 0; b < steps; ++b) {
        const double s = -0.5 + 2.0 * a / (steps - 1);
        const double t = -1.0 + 2.0 * b / (steps - 1);
        grid_max = std::max(grid_max, value(s * dir1 + t * dir2));
      }
    }
    const double g = gc.group_objective(j, alpha);
    CHECK(g >= grid_max - 1e-10);
    CHECK(g - grid_max <= 1e-3 * (1.0 + std::abs(g)));
  }
}

TEST_CASE("best response, hand cases") {
  GameCoefficients gc;
  GroupCoefficients g;
  g.kappa = 0.0;
  g.nu = Eigen::Vector2d(1.0, 2.0);
  g.sigma = Eigen::Matrix2d::Identity();
  g.n = 1;
  gc.groups = {g};
  const BestResponse br = best_response(Eigen::VectorXd::Ones(1), gc);
  CHECK((br.alpha - Eigen::Vector2d(1.0, 2.0)).norm() <= 1e-12);
  CHECK_FALSE(br.projected);

  gc.groups[0].nu.setZero();
  CHECK(best_response(Eigen::VectorXd::Ones(1), gc).alpha.norm() == 0.0);
}

TEST_CASE("best response beats a random search oracle") {
  Rng rng(55);
  CoefficientOptions opts;
  opts.lambda = 0.05;
  const auto gc = random_game(rng, 2, 8, 3, opts);
  Eigen::VectorXd w(2);
  w << 0.3, 0.7;
  const Eigen::VectorXd alpha = best_response(w, gc).alpha;
  const double value = weighted(gc, w, alpha);

  double best = 1e300;
  Eigen::VectorXd best_point;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::VectorXd cand = 3.0 * random_vector(rng, 3);
    const double v = weighted(gc, w, cand);
    if (v < best) {
      best = v;
      best_point = cand;
    }
  }
  // Local refinement by gradient descent with backtracking.
  Eigen::VectorXd x = best_point;
  for (int it = 0; it < 5000; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3);
    for (std::size_t j = 0; j < 2; ++j) {
      const auto& g = gc.groups[j];
      grad += w(j) * 2.0 * (g.sigma * x - g.nu) / static_cast<double>(g.n);
    }
    double step = 1.0;
    while (step > 1e-12 && weighted(gc, w, x - step * grad) > weighted(gc, w, x)) step *= 0.5;
    x -= step * grad;
  }
  best = std::min(best, weighted(gc, w, x));
  CHECK(value <= best + 1e-10);
}

TEST_CASE("best response respects the norm bound") {
  Rng rng(12);
  CoefficientOptions opts;
  opts.lambda = 0.01;
  opts.norm_bound = 0.05;
  const auto gc = random_game(rng, 3, 10, 3, opts);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  const BestResponse br = best_response(w, gc);
  REQUIRE(br.projected);
  CHECK(br.alpha.norm() == doctest::Approx(0.05).epsilon(1e-8));
  CHECK(br.multiplier > 0.0);
  // Any other point on the sphere is no better.
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd u = random_vector(rng, 3);
    u *= 0.05 / u.norm();
    CHECK(gc.weighted_objective(w, br.alpha) <= gc.weighted_objective(w, u) + 1e-12);
  }
}

TEST_CASE("multiplicative weights step") {
  const Eigen::Vector2d half(0.5, 0.5);
  const Eigen::Vector3d w(0.2, 0.3, 0.5);
  CHECK((mw_update(w, Eigen::Vector3d::Constant(0.7), 0.4, 1.0) - w).norm() <= 1e-15);
  CHECK((mw_update(w, Eigen::Vector3d(1.0, -1.0, 0.2), 0.0, 1.0) - w).norm() <= 1e-15);
  const Eigen::VectorXd out = mw_update(half, Eigen::Vector2d(1.0, 0.0), std::log(2.0), 1.0);
  CHECK(out(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(out(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  // Clipping: a payoff of 5 with clip 1 acts like a payoff of 1.
  CHECK((mw_update(half, Eigen::Vector2d(5.0, 0.0), std::log(2.0), 1.0) - out).norm() <= 1e-15);
  CHECK_THROWS_AS(mw_update(Eigen::Vector2d(0.7, 0.7), Eigen::Vector2d::Zero(), 0.1, 1.0),
                  ValidationError);
}

TEST_CASE("single group game has no adversary freedom") {
  Rng rng(101);
  CoefficientOptions opts;
  opts.lambda = 0.1;
  const auto gc = random_game(rng, 1, 10, 3, opts);
  SolverConfig cfg;
  cfg.iterations = 1;
  const SolverResult r = solve(gc, cfg);
  CHECK(r.gap <= 1e-10);
  CHECK(r.w_bar(0) == 1.0);
  CHECK((r.alpha_bar - best_response(Eigen::VectorXd::Ones(1), gc).alpha).norm() <= 1e-12);
}

TEST_CASE("symmetric two-group game") {
  Rng rng(102);
  CoefficientOptions opts;
  opts.lambda = 0.1;
  const auto one = random_game(rng, 1, 10, 3, opts);
  GameCoefficients gc = one;
  gc.groups.push_back(one.groups[0]);
  SolverConfig cfg;
  cfg.iterations = 200;
  const SolverResult r = solve(gc, cfg);
  CHECK(r.w_bar(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.w_bar(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK((r.alpha_bar - best_response(Eigen::VectorXd::Ones(1), one).alpha).norm() <= 1e-10);
}

TEST_CASE("solver output is consistent with its own trace and gap") {
  Rng rng(103);
  CoefficientOptions opts;
  opts.lambda = 0.1;
  const auto gc = random_game(rng, 4, 12, 3, opts);
  SolverConfig cfg;
  cfg.iterations = 500;
  const SolverResult r = solve(gc, cfg);
  CHECK(r.trace.size() == 500);
  CHECK(r.w_bar.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.w_bar.minCoeff() >= 0.0);
  CHECK(r.upper == doctest::Approx(gc.worst_group_objective(r.alpha_bar)).epsilon(1e-12));
  CHECK(r.lower <= r.upper + 1e-12);
  CHECK(r.gap == doctest::Approx(r.upper - r.lower));
  for (const auto& rec : r.trace) CHECK(rec.gap_bound >= -1e-10);
  // Final iterate's certified bound shrinks relative to the first.
  CHECK(r.trace.back().gap_bound < r.trace.front().gap_bound);
}

TEST_CASE("solver agrees with a brute-force grid on a 2-d instance") {
  Rng rng(104);
  CoefficientOptions opts;
  opts.lambda = 0.1;
  opts.norm_bound = 1.0;
  const auto gc = random_game(rng, 3, 10, 2, opts);
  SolverConfig cfg;
  cfg.iterations = 4000;
  const SolverResult r = solve(gc, cfg);
  const BruteForceResult bf = brute_force_minmax(gc, 400, 1.0);
  CHECK(r.upper <= bf.value + r.gap + 1e-9);
  CHECK(bf.value <= r.upper + bf.error_bound + 1e-9);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.iterations = 100;
  cfg.eta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.eta.reset();
  CHECK(cfg.step_size(4) == doctest::Approx(std::sqrt(std::log(4.0) / 100.0)));
}

TEST_CASE("predictions") {
  const FeatureMap id = FeatureMap::explicit_linear(1);
  CHECK(predict(Eigen::VectorXd::Zero(1), id, Eigen::VectorXd::Constant(1, 3.0)) == 0.0);
  CHECK(predict(Eigen::VectorXd::Constant(1, 2.0), id, Eigen::VectorXd::Constant(1, 3.0)) == 6.0);

  Rng rng(5);
  std::vector<Group> groups;
  for (int j = 0; j < 2; ++j) groups.push_back({random_matrix(rng, 2, 1), random_vector(rng, 2)});
  const GroupedDataset ds(groups);
  const KernelConfig cfg{0.8};
  const auto km = build_group_kernels(ds, cfg);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(4);
  alpha(0) = 1.0;
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.37);
  CHECK(predict(alpha, km, x) ==
        doctest::Approx(rbf_kernel(ds.group(0).x.row(0).transpose(), x, cfg)).epsilon(1e-14));
}

TEST_CASE("empirical moment violation") {
  const Eigen::Vector2d y(1.0, -1.0), h(0.0, 0.0);
  CHECK(moment_violation(h, y, Eigen::Vector2d::Zero(), 1.0) == 0.0);
  const Eigen::Vector2d f(1.0, 1.0);
  CHECK(moment_violation(h, y, f, 1.0) == doctest::Approx(-1.0));
  const Eigen::Vector2d f2(0.5, 2.0);
  CHECK(moment_violation(y, y, f2, 0.7) == doctest::Approx(-0.7 * (0.25 + 4.0) / 2.0));
}
