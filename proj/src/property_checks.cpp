#include "robust_moments/property_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "robust_moments/common.hpp"
#include "robust_moments/features.hpp"
#include "robust_moments/linalg.hpp"

namespace robust_moments {
namespace {

Eigen::VectorXd normal_vector(Rng& rng, Index n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

Eigen::MatrixXd normal_matrix(Rng& rng, Index rows, Index cols) {
  Eigen::MatrixXd a(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) a(i, j) = rng.normal();
  }
  return a;
}

CheckResult finish(std::string name, double max_error, double tol, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.max_error = max_error;
  r.tolerance = tol;
  r.passed = std::isfinite(max_error) && max_error <= tol;
  r.detail = std::move(detail);
  return r;
}

// L2(marginal) projection of g onto the column span of `basis`.
Eigen::VectorXd project(const DiscreteDistribution& dist, const Eigen::MatrixXd& basis,
                        const Eigen::VectorXd& g) {
  const Eigen::VectorXd p = dist.marginal();
  const Eigen::MatrixXd gram = basis.transpose() * p.asDiagonal() * basis;
  const Eigen::VectorXd rhs = basis.transpose() * p.asDiagonal() * g;
  return basis * linalg::pinv_solve(linalg::symmetrize(gram), rhs, 1e-12);
}

// Several distributions over one domain, sharing the hypothesis and test
// functions.
struct MultiInstance {
  std::vector<DiscreteDistribution> dists;
  Eigen::VectorXd h;
  std::vector<Eigen::VectorXd> test_functions;
  double c = 1.0;
};

MultiInstance random_multi_instance(Rng& rng, double c) {
  MultiInstance out;
  out.c = c;
  const int domain = 1 + static_cast<int>(rng.below(20));
  const int count = 2 + static_cast<int>(rng.below(3));
  for (int k = 0; k < count; ++k) {
    out.dists.push_back(random_finite_instance(rng, domain, 1, c).dist);
  }
  out.h = normal_vector(rng, domain);
  const int functions = 1 + static_cast<int>(rng.below(40));
  for (int k = 0; k < functions; ++k) out.test_functions.push_back(normal_vector(rng, domain));
  return out;
}

double max_value(const MultiInstance& inst) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& d : inst.dists) {
    best = std::max(best, enumerate_adversarial_value(d, inst.h, inst.test_functions, inst.c));
  }
  return best;
}

double max_distance(const MultiInstance& inst) {
  double best = 0.0;
  for (const auto& d : inst.dists) {
    best = std::max(best, d.sq_norm(d.conditional_mean() - inst.h));
  }
  return best;
}

const double kCs[] = {0.5, 1.0, 2.0};

}  // namespace

FiniteInstance random_finite_instance(Rng& rng, int domain, int functions, double c) {
  FiniteInstance inst;
  inst.c = c;
  inst.dist.domain = domain;
  std::vector<double> ys;
  std::vector<double> ps;
  for (int k = 0; k < domain; ++k) {
    const int labels = 1 + static_cast<int>(rng.below(2));
    for (int l = 0; l < labels; ++l) {
      inst.dist.x.push_back(k);
      ys.push_back(2.0 * rng.normal());
      ps.push_back(0.05 + rng.uniform());
    }
  }
  inst.dist.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Index>(ys.size()));
  inst.dist.prob = Eigen::Map<Eigen::VectorXd>(ps.data(), static_cast<Index>(ps.size()));
  inst.dist.prob /= inst.dist.prob.sum();
  inst.h = normal_vector(rng, domain);
  for (int k = 0; k < functions; ++k) inst.test_functions.push_back(normal_vector(rng, domain));
  return inst;
}

CheckResult check_completing_square(const CheckOptions& opts, int instances) {
  Rng rng(derive_seed(opts.seed, 1, 0));
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const int domain = 1 + static_cast<int>(rng.below(20));
    const int functions = 1 + static_cast<int>(rng.below(50));
    const FiniteInstance inst = random_finite_instance(rng, domain, functions, kCs[i % 3]);
    const double lhs =
        enumerate_adversarial_value(inst.dist, inst.h, inst.test_functions, inst.c);
    double rhs = completing_square_rhs(inst.dist, inst.h, inst.test_functions, inst.c);
    if (opts.inject_fault) rhs = -rhs;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return finish("completing_square", worst, 1e-8,
                std::to_string(instances) + " instances, |X| <= 20, |F| <= 50");
}

CheckResult check_sandwich_upper(const CheckOptions& opts, int instances) {
  Rng rng(derive_seed(opts.seed, 2, 0));
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const MultiInstance inst = random_multi_instance(rng, kCs[i % 3]);
    worst = std::max(worst, max_value(inst) - max_distance(inst) / inst.c);
  }
  return finish("sandwich_upper", worst, 1e-8, "max violation of value <= max_D ||h0 - h||^2 / c");
}

CheckResult check_sandwich_lower(const CheckOptions& opts, int instances) {
  Rng rng(derive_seed(opts.seed, 3, 0));
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    MultiInstance inst = random_multi_instance(rng, kCs[i % 3]);
    const Index domain = inst.h.size();
    const Index dim = 1 + static_cast<Index>(rng.below(3));
    const Eigen::MatrixXd basis = normal_matrix(rng, domain, dim);
    double eps = 0.0;
    for (const auto& d : inst.dists) {
      const Eigen::VectorXd h0 = d.conditional_mean();
      const Eigen::VectorXd best = project(d, basis, h0);
      eps = std::max(eps, d.sq_norm(h0 - best));
      inst.test_functions.push_back((best - inst.h) / inst.c);
    }
    const double lower = (max_distance(inst) - eps) / inst.c;
    worst = std::max(worst, lower - max_value(inst));
  }
  return finish("sandwich_lower", worst, 1e-8,
                "max violation of (max_D ||h0 - h||^2 - eps) / c <= value");
}

CheckResult check_realizable_equivalence(const CheckOptions& opts, int instances) {
  Rng rng(derive_seed(opts.seed, 4, 0));
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    MultiInstance inst = random_multi_instance(rng, 1.0);
    for (const auto& d : inst.dists) inst.test_functions.push_back(d.conditional_mean() - inst.h);
    worst = std::max(worst, std::abs(max_value(inst) - max_distance(inst)));
  }
  return finish("realizable_equivalence", worst, 1e-8,
                "c = 1, test class contains every residual");
}

CheckResult check_linear_inner_max(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, 5, 0));
  double worst = 0.0;
  for (double c : kCs) {
    const Eigen::MatrixXd phi = normal_matrix(rng, 4, 2);
    const Eigen::VectorXd y = normal_vector(rng, 4);
    CoefficientOptions co;
    co.lambda = 0.1;
    co.mu = 0.01;
    co.a_n = c;
    const GameCoefficients gc = build_linear_coefficients({phi}, {y}, co);
    const double n = 4.0;
    const Eigen::MatrixXd gram = phi.transpose() * phi;
    Eigen::MatrixXd system = c * gram;
    system.diagonal().array() += n * co.lambda;
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd alpha = normal_vector(rng, 2);
      const Eigen::VectorXd beta = system.partialPivLu().solve(phi.transpose() * (y - phi * alpha));
      const double direct =
          (2.0 * y.dot(phi * beta) - 2.0 * alpha.dot(gram * beta) - c * beta.dot(gram * beta)) / n -
          co.lambda * beta.squaredNorm() + co.mu * alpha.squaredNorm();
      const double reduced = gc.group_objective(0, alpha);
      worst = std::max(worst, std::abs(direct - reduced) / (1.0 + std::abs(direct)));
    }
  }
  return finish("linear_inner_max", worst, 1e-8, "reduced game vs direct inner maximization");
}

CheckResult check_mw_shift_invariance(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, 6, 0));
  double worst = 0.0;
  const double no_clip = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 50; ++k) {
    const Index m = 2 + static_cast<Index>(rng.below(10));
    Eigen::VectorXd w = (normal_vector(rng, m).array().exp()).matrix();
    w /= w.sum();
    const Eigen::VectorXd p = normal_vector(rng, m);
    const double shift = 10.0 * rng.normal();
    const double eta = rng.uniform(0.01, 1.0);
    const Eigen::VectorXd a = mw_update(w, p, eta, no_clip);
    const Eigen::VectorXd b =
        mw_update(w, (p.array() + shift).matrix(), eta, no_clip);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return finish("mw_shift_invariance", worst, 1e-12);
}

GameCoefficients random_linear_game(Rng& rng, int groups, int samples, int dim,
                                    const CoefficientOptions& opts) {
  std::vector<Eigen::MatrixXd> features;
  std::vector<Eigen::VectorXd> labels;
  const Eigen::VectorXd base = normal_vector(rng, dim);
  for (int j = 0; j < groups; ++j) {
    const Eigen::MatrixXd phi = normal_matrix(rng, samples, dim);
    const Eigen::VectorXd coef = base + normal_vector(rng, dim);
    labels.push_back(phi * coef + normal_vector(rng, samples, 0.5));
    features.push_back(phi);
  }
  return build_linear_coefficients(features, labels, opts);
}

CheckResult check_best_response_stationarity(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, 7, 0));
  double worst = 0.0;
  CoefficientOptions co;
  co.lambda = 0.1;
  for (int k = 0; k < 20; ++k) {
    const GameCoefficients gc = random_linear_game(rng, 4, 20, 5, co);
    Eigen::VectorXd w = (normal_vector(rng, 4).array().exp()).matrix();
    w /= w.sum();
    const Eigen::VectorXd alpha = best_response(w, gc).alpha;
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(5, 5);
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(5);
    for (std::size_t j = 0; j < gc.num_groups(); ++j) {
      const double weight = w(static_cast<Index>(j)) / static_cast<double>(gc.groups[j].n);
      sigma += weight * gc.groups[j].sigma;
      nu += weight * gc.groups[j].nu;
    }
    worst = std::max(worst, 2.0 * (sigma * alpha - nu).norm() / (1.0 + nu.norm()));
  }
  return finish("best_response_stationarity", worst, 1e-8,
                "|2 (Sigma_bar alpha - nu_bar)| / (1 + |nu_bar|)");
}

CheckResult check_payoff_convexity(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, 8, 0));
  double worst = 0.0;
  CoefficientOptions co;
  co.lambda = 0.05;
  co.mu = 0.01;
  const GameCoefficients gc = random_linear_game(rng, 5, 15, 4, co);
  for (int k = 0; k < 200; ++k) {
    const Eigen::VectorXd a = normal_vector(rng, 4, 3.0);
    const Eigen::VectorXd b = normal_vector(rng, 4, 3.0);
    const double t = rng.uniform();
    for (std::size_t j = 0; j < gc.num_groups(); ++j) {
      const double mid = gc.group_objective(j, t * a + (1.0 - t) * b);
      const double chord = t * gc.group_objective(j, a) + (1.0 - t) * gc.group_objective(j, b);
      worst = std::max(worst, (mid - chord) / (1.0 + std::abs(chord)));
    }
  }
  return finish("payoff_convexity", worst, 1e-12, "relative midpoint excess over the chord");
}

CheckResult check_nystrom_exactness(const CheckOptions& opts) {
  // Jittered 6x6 lattice with unit spacing: distinct, well-separated points,
  // so the kernel matrix is comfortably full rank.
  Rng rng(derive_seed(opts.seed, 9, 0));
  Eigen::MatrixXd pts(36, 2);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      pts(6 * i + j, 0) = i + rng.uniform(-0.1, 0.1);
      pts(6 * i + j, 1) = j + rng.uniform(-0.1, 0.1);
    }
  }
  const KernelConfig kc{1.0};
  const Eigen::MatrixXd k = linalg::symmetrize(kernel_matrix(pts, pts, kc));
  const FeatureMap fm = fit_nystrom_landmarks(pts, kc, pts.rows());
  const Eigen::MatrixXd phi = fm.apply_rows(pts);
  const double rel = (k - phi * phi.transpose()).norm() / k.norm();
  const linalg::SymmetricEigen eig(k);
  std::ostringstream detail;
  detail << "36 points, condition number " << eig.values.maxCoeff() / eig.values.minCoeff();
  return finish("nystrom_exactness", rel, 1e-6, detail.str());
}

GapRate measure_gap_rate(const GameCoefficients& gc, const std::vector<int>& horizons) {
  GapRate out;
  out.horizons = horizons;
  for (int t : horizons) {
    SolverConfig sc;
    sc.iterations = t;
    out.gaps.push_back(solve(gc, sc).gap);
  }
  const auto n = static_cast<double>(horizons.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    const double lx = std::log(static_cast<double>(horizons[i]));
    const double ly = std::log(std::max(out.gaps[i], std::numeric_limits<double>::min()));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

CheckResult check_duality_gap_rate(const CheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, 10, 0));
  CoefficientOptions co;
  co.lambda = 0.1;
  const GameCoefficients gc = random_linear_game(rng, 10, 30, 5, co);
  const GapRate rate = measure_gap_rate(gc, {100, 1000, 10000});
  std::ostringstream detail;
  detail << "slope " << rate.slope << " (gaps";
  for (double g : rate.gaps) detail << ' ' << g;
  detail << ')';
  return finish("duality_gap_rate", std::abs(rate.slope + 0.5), 0.2, detail.str());
}

std::vector<CheckResult> run_all_checks(const CheckOptions& opts) {
  return {check_completing_square(opts),      check_sandwich_upper(opts),
          check_sandwich_lower(opts),         check_realizable_equivalence(opts),
          check_linear_inner_max(opts),       check_mw_shift_invariance(opts),
          check_best_response_stationarity(opts), check_payoff_convexity(opts),
          check_nystrom_exactness(opts),      check_duality_gap_rate(opts)};
}

}  // namespace robust_moments
