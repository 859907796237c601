#include "robust_moments/moment_game.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "robust_moments/common.hpp"
#include "robust_moments/linalg.hpp"

namespace robust_moments {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::VectorXd softmax_from_log(const Eigen::VectorXd& log_w) {
  const double top = log_w.maxCoeff();
  Eigen::VectorXd w = (log_w.array() - top).exp().matrix();
  return w / w.sum();
}

// log w_j += eta * clip(payoff_j), then renormalized so the max is 0.
void mw_log_step(Eigen::VectorXd& log_w, const Eigen::VectorXd& payoffs,
                 double eta, double payoff_clip) {
  for (Index j = 0; j < log_w.size(); ++j) {
    log_w(j) += eta * std::clamp(payoffs(j), -payoff_clip, payoff_clip);
  }
  log_w.array() -= log_w.maxCoeff();
}

}  // namespace

void CoefficientOptions::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("lambda must be a finite number >= 0");
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw ValidationError("mu must be a finite number >= 0");
  }
  if (!(norm_bound > 0.0)) throw ValidationError("norm bound must be > 0");
  if (!(a_n > 0.0) || !std::isfinite(a_n)) throw ValidationError("a_n must be > 0");
  if (!(ridge_jitter > 0.0)) throw ValidationError("ridge_jitter must be > 0");
}

double GameCoefficients::group_objective(std::size_t j,
                                         const Eigen::VectorXd& alpha) const {
  const GroupCoefficients& g = groups.at(j);
  if (alpha.size() != g.nu.size()) {
    throw ValidationError("coefficient dimension mismatch");
  }
  return (g.kappa - 2.0 * g.nu.dot(alpha) + alpha.dot(g.sigma * alpha)) /
         static_cast<double>(g.n);
}

Eigen::VectorXd GameCoefficients::group_objectives(const Eigen::VectorXd& alpha) const {
  Eigen::VectorXd out(static_cast<Index>(groups.size()));
  for (std::size_t j = 0; j < groups.size(); ++j) {
    out(static_cast<Index>(j)) = group_objective(j, alpha);
  }
  return out;
}

double GameCoefficients::worst_group_objective(const Eigen::VectorXd& alpha) const {
  return group_objectives(alpha).maxCoeff();
}

double GameCoefficients::weighted_objective(const Eigen::VectorXd& w,
                                            const Eigen::VectorXd& alpha) const {
  return w.dot(group_objectives(alpha));
}

void GameCoefficients::validate() const {
  if (groups.empty()) throw ValidationError("game needs at least one group");
  const Index d = dim();
  if (d < 1) throw ValidationError("game coefficient dimension must be >= 1");
  for (const auto& g : groups) {
    if (g.nu.size() != d || g.sigma.rows() != d || g.sigma.cols() != d) {
      throw ValidationError("inconsistent game coefficient shapes");
    }
    if (g.n < 1) throw ValidationError("group sample count must be >= 1");
  }
  options.validate();
}

std::vector<Eigen::VectorXd> group_labels(const GroupedDataset& ds) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(ds.num_groups());
  for (const auto& g : ds.groups()) out.push_back(g.y);
  return out;
}

GameCoefficients build_linear_coefficients(
    const std::vector<Eigen::MatrixXd>& features,
    const std::vector<Eigen::VectorXd>& labels, const CoefficientOptions& opts) {
  opts.validate();
  if (features.empty() || features.size() != labels.size()) {
    throw ValidationError("need one feature matrix and label vector per group");
  }
  const Index d = features.front().cols();
  GameCoefficients gc;
  gc.options = opts;
  gc.groups.resize(features.size());
  std::vector<char> jittered(features.size(), 0);

  parallel_for(features.size(), [&](std::size_t j) {
    const Eigen::MatrixXd& phi = features[j];
    const Eigen::VectorXd& y = labels[j];
    if (phi.cols() != d) throw ValidationError("feature dimension differs across groups");
    if (phi.rows() != y.size() || y.size() == 0) {
      throw ValidationError("group " + std::to_string(j) + ": feature/label size mismatch");
    }
    const auto n = static_cast<double>(y.size());
    const linalg::SymmetricEigen eig(linalg::symmetrize(phi.transpose() * phi));
    const Eigen::VectorXd s = eig.values.cwiseMax(0.0);
    Eigen::VectorXd denom = (opts.a_n * s).array() + n * opts.lambda;
    const double top = denom.maxCoeff();
    if (opts.lambda == 0.0 && (top <= 0.0 || denom.minCoeff() <= 1e-12 * top)) {
      denom.array() += opts.ridge_jitter * std::max(top, 1.0);
      jittered[j] = 1;
    }
    const Eigen::VectorXd b = eig.vectors.transpose() * (phi.transpose() * y);
    GroupCoefficients& out = gc.groups[j];
    out.n = y.size();
    out.kappa = (b.array().square() / denom.array()).sum();
    out.nu = eig.vectors * (s.array() * b.array() / denom.array()).matrix();
    const Eigen::VectorXd shrink = (s.array().square() / denom.array()).matrix();
    out.sigma = linalg::symmetrize(eig.vectors * shrink.asDiagonal() *
                                   eig.vectors.transpose());
    out.sigma.diagonal().array() += opts.mu * n;
  });

  const auto count = std::count(jittered.begin(), jittered.end(), 1);
  if (count > 0) {
    warn("linear coefficients: singular Gram matrix with lambda = 0 in " +
         std::to_string(count) + " group(s); added ridge jitter");
  }
  return gc;
}

GameCoefficients build_linear_coefficients(const GroupedDataset& ds,
                                           const FeatureMap& fm,
                                           const CoefficientOptions& opts) {
  return build_linear_coefficients(group_features(ds, fm), group_labels(ds), opts);
}

GameCoefficients build_rkhs_coefficients(const GroupKernelMatrices& km,
                                         const std::vector<Eigen::VectorXd>& labels,
                                         const CoefficientOptions& opts) {
  opts.validate();
  if (!(opts.lambda > 0.0)) {
    throw ValidationError("RKHS coefficients require lambda > 0");
  }
  if (labels.size() != km.num_groups()) {
    throw ValidationError("need one label vector per group");
  }
  const Index total = km.full.rows();
  GameCoefficients gc;
  gc.options = opts;
  gc.groups.resize(km.num_groups());
  parallel_for(km.num_groups(), [&](std::size_t j) {
    const Eigen::VectorXd& y = labels[j];
    const Index n = km.sizes[j];
    if (y.size() != n) throw ValidationError("label count does not match kernel block");
    // Q_j = K_j (c K_j + lambda n I)^{-1}; K_j and the inverse share
    // eigenvectors, so Q_j = V diag(s / (c s + lambda n)) V^T.
    const linalg::SymmetricEigen eig(km.within[j]);
    const Eigen::VectorXd s = eig.values.cwiseMax(0.0);
    const Eigen::VectorXd q =
        (s.array() / (opts.a_n * s.array() + opts.lambda * static_cast<double>(n))).matrix();
    const Eigen::MatrixXd qmat =
        linalg::symmetrize(eig.vectors * q.asDiagonal() * eig.vectors.transpose());
    const Eigen::MatrixXd rows = km.row_block(j);  // n x N
    GroupCoefficients& out = gc.groups[j];
    out.n = n;
    const Eigen::VectorXd qy = qmat * y;
    out.kappa = y.dot(qy);
    out.nu = rows.transpose() * qy;
    out.sigma = rows.transpose() * qmat * rows;
    out.sigma.noalias() += opts.mu * static_cast<double>(n) * km.full;
    out.sigma = linalg::symmetrize(out.sigma);
    if (out.nu.size() != total) throw ValidationError("kernel block shape mismatch");
  });
  return gc;
}

BestResponse best_response(const Eigen::VectorXd& w, const GameCoefficients& gc,
                           double pinv_tol) {
  if (w.size() != static_cast<Index>(gc.num_groups())) {
    throw ValidationError("best_response: weight vector length mismatch");
  }
  const Index d = gc.dim();
  Eigen::MatrixXd sigma_bar = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd nu_bar = Eigen::VectorXd::Zero(d);
  for (std::size_t j = 0; j < gc.num_groups(); ++j) {
    const double weight = w(static_cast<Index>(j)) / static_cast<double>(gc.groups[j].n);
    if (weight == 0.0) continue;
    sigma_bar.noalias() += weight * gc.groups[j].sigma;
    nu_bar.noalias() += weight * gc.groups[j].nu;
  }
  const linalg::SymmetricEigen eig(linalg::symmetrize(sigma_bar));
  BestResponse out;
  out.alpha = linalg::pinv_solve(eig, nu_bar, pinv_tol);

  const double bound = gc.options.norm_bound;
  if (!std::isfinite(bound) || out.alpha.norm() <= bound) return out;

  // (Sigma_bar + tau I) alpha = nu_bar with ||alpha(tau)|| = A;
  // ||alpha(tau)|| is decreasing in tau.
  const Eigen::VectorXd coords = eig.vectors.transpose() * nu_bar;
  const Eigen::ArrayXd s = eig.values.array();
  auto norm_at = [&](double tau) {
    return (coords.array() / (s + tau)).matrix().norm();
  };
  const double shift = std::max(0.0, -s.minCoeff());
  double lo = shift;
  double hi = shift + nu_bar.norm() / bound + 1e-300;
  while (norm_at(hi) > bound) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (norm_at(mid) > bound ? lo : hi) = mid;
  }
  out.alpha = eig.vectors * (coords.array() / (s + hi)).matrix();
  out.projected = true;
  out.multiplier = hi;
  return out;
}

Eigen::VectorXd mw_update(const Eigen::VectorXd& w, const Eigen::VectorXd& payoffs,
                          double eta, double payoff_clip) {
  if (w.size() != payoffs.size()) throw ValidationError("mw_update: length mismatch");
  if (!payoffs.allFinite()) throw ValidationError("mw_update: payoffs must be finite");
  if ((w.array() < 0.0).any() || !(std::abs(w.sum() - 1.0) <= 1e-9)) {
    throw ValidationError("mw_update: weights must be a distribution");
  }
  Eigen::VectorXd log_w(w.size());
  for (Index j = 0; j < w.size(); ++j) {
    log_w(j) = w(j) > 0.0 ? std::log(w(j)) : -std::numeric_limits<double>::infinity();
  }
  mw_log_step(log_w, payoffs, eta, payoff_clip);
  return softmax_from_log(log_w);
}

void SolverConfig::validate() const {
  if (iterations < 1) throw ValidationError("iteration count must be >= 1");
  if (eta && !(*eta > 0.0)) throw ValidationError("eta must be > 0");
  if (!(payoff_clip > 0.0)) throw ValidationError("payoff clip must be > 0");
  if (!(pinv_tol > 0.0)) throw ValidationError("pseudo-inverse tolerance must be > 0");
}

double SolverConfig::step_size(std::size_t num_groups) const {
  if (eta) return *eta;
  return std::sqrt(std::log(static_cast<double>(num_groups)) / iterations);
}

SolverResult solve(const GameCoefficients& gc, const SolverConfig& cfg) {
  gc.validate();
  cfg.validate();
  const auto start = Clock::now();
  const auto m = static_cast<Index>(gc.num_groups());
  const Index d = gc.dim();
  const double eta = cfg.step_size(gc.num_groups());

  SolverResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  Eigen::VectorXd log_w = Eigen::VectorXd::Constant(m, -std::log(static_cast<double>(m)));
  Eigen::VectorXd alpha_sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd payoff_sum = Eigen::VectorXd::Zero(m);
  double realized_sum = 0.0;
  double scale = 0.0;

  for (int t = 1; t <= cfg.iterations; ++t) {
    const Eigen::VectorXd w = softmax_from_log(log_w);
    const BestResponse br = best_response(w, gc, cfg.pinv_tol);
    if (br.projected) ++result.projected_iterations;
    const Eigen::VectorXd g = gc.group_objectives(br.alpha);
    alpha_sum += br.alpha;
    w_sum += w;
    payoff_sum += g;
    realized_sum += w.dot(g);
    // By convexity max_j g_j(avg alpha) <= max_j avg g_j, and every realized
    // value w_t . g(alpha_t) = min_alpha L(alpha, w_t) is below the game value.
    result.trace.push_back({g, (payoff_sum.maxCoeff() - realized_sum) / t});

    scale = std::max(scale, g.cwiseAbs().maxCoeff());
    if (scale > 0.0) mw_log_step(log_w, g / scale, eta, cfg.payoff_clip);
  }

  result.alpha_bar = alpha_sum / cfg.iterations;
  result.w_bar = w_sum / cfg.iterations;
  result.upper = gc.worst_group_objective(result.alpha_bar);
  const BestResponse at_mean = best_response(result.w_bar, gc, cfg.pinv_tol);
  result.lower = gc.weighted_objective(result.w_bar, at_mean.alpha);
  result.gap = result.upper - result.lower;
  result.timings.game_seconds = seconds_since(start);
  result.timings.total_seconds = result.timings.game_seconds;
  return result;
}

double predict(const Eigen::VectorXd& alpha, const FeatureMap& fm,
               const Eigen::VectorXd& x) {
  if (alpha.size() != fm.dim()) {
    throw ValidationError("predict: coefficient dimension " + std::to_string(alpha.size()) +
                          " does not match feature dimension " + std::to_string(fm.dim()));
  }
  return alpha.dot(fm.apply(x));
}

double predict(const Eigen::VectorXd& alpha, const GroupKernelMatrices& km,
               const Eigen::VectorXd& x) {
  if (alpha.size() != km.centers.rows()) {
    throw ValidationError("predict: coefficient count does not match kernel centers");
  }
  if (x.size() != km.centers.cols()) throw ValidationError("predict: covariate dimension mismatch");
  return (kernel_matrix(x.transpose(), km.centers, km.config) * alpha)(0);
}

double moment_violation(const Eigen::VectorXd& h, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& f, double a_n) {
  if (h.size() != y.size() || f.size() != y.size()) {
    throw ValidationError("moment_violation: length mismatch");
  }
  if (y.size() == 0) throw ValidationError("moment_violation: empty input");
  const Eigen::ArrayXd r = (y - h).array();
  return (2.0 * r * f.array() - a_n * f.array().square()).mean();
}

}  // namespace robust_moments
