#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include "robust_moments/dataset.hpp"
#include "robust_moments/features.hpp"

namespace robust_moments {

/// Per-group triple of the reduced quadratic game. The worst-case moment
/// violation of hypothesis coefficients alpha on group j is
///   g_j(alpha) = (kappa - 2 nu^T alpha + alpha^T sigma alpha) / n.
struct GroupCoefficients {
  double kappa = 0.0;
  Eigen::VectorXd nu;
  Eigen::MatrixXd sigma;
  Index n = 1;
};

struct CoefficientOptions {
  double lambda = 0.0;  // adversary (test function) penalty
  double mu = 0.0;      // learner (hypothesis) penalty
  double norm_bound = std::numeric_limits<double>::infinity();  // ||alpha||_2 <= A
  double a_n = 1.0;     // moment-penalty multiplier c in E[2(Y-h)f - c f^2]
  double ridge_jitter = 1e-10;

  void validate() const;
};

struct GameCoefficients {
  std::vector<GroupCoefficients> groups;
  CoefficientOptions options;

  std::size_t num_groups() const { return groups.size(); }
  Index dim() const { return groups.empty() ? 0 : groups.front().nu.size(); }

  double group_objective(std::size_t j, const Eigen::VectorXd& alpha) const;
  Eigen::VectorXd group_objectives(const Eigen::VectorXd& alpha) const;
  double worst_group_objective(const Eigen::VectorXd& alpha) const;
  /// sum_j w_j g_j(alpha).
  double weighted_objective(const Eigen::VectorXd& w,
                            const Eigen::VectorXd& alpha) const;

  void validate() const;
};

/// Linear hypothesis class alpha^T phi(x). Uses
///   Q_j = Phi_j (c Phi_j^T Phi_j + n_j lambda I)^{-1} Phi_j^T,
///   kappa_j = y_j^T Q_j y_j, nu_j = Phi_j^T Q_j y_j,
///   Sigma_j = Phi_j^T Q_j Phi_j + mu n_j I,
/// evaluated through the eigendecomposition of Phi_j^T Phi_j. With lambda = 0
/// and a singular Gram matrix, a relative jitter is added (with a warning).
GameCoefficients build_linear_coefficients(const GroupedDataset& ds,
                                           const FeatureMap& fm,
                                           const CoefficientOptions& opts);
GameCoefficients build_linear_coefficients(
    const std::vector<Eigen::MatrixXd>& features,
    const std::vector<Eigen::VectorXd>& labels, const CoefficientOptions& opts);

/// Representer-form RKHS game over alpha in R^N (N = total sample count):
///   Q_j = K_j (c K_j + lambda n_j I)^{-1}, kappa_j = y_j^T Q_j y_j,
///   nu_j = M_j^T Q_j y_j, Sigma_j = M_j^T Q_j M_j + mu n_j M.
/// Requires lambda > 0.
GameCoefficients build_rkhs_coefficients(const GroupKernelMatrices& km,
                                         const std::vector<Eigen::VectorXd>& labels,
                                         const CoefficientOptions& opts);

/// Labels of each group, in dataset order.
std::vector<Eigen::VectorXd> group_labels(const GroupedDataset& ds);

struct BestResponse {
  Eigen::VectorXd alpha;
  bool projected = false;   // unconstrained minimizer exceeded the norm bound
  double multiplier = 0.0;  // tau with (Sigma_bar + tau I) alpha = nu_bar
};

/// Minimizer of sum_j w_j g_j over the ball ||alpha|| <= A. The unconstrained
/// solution is the pseudo-inverse solve Sigma_bar^+ nu_bar with
/// Sigma_bar = sum_j (w_j / n_j) Sigma_j and nu_bar likewise; when it leaves
/// the ball the norm-constraint multiplier is found by bisection.
BestResponse best_response(const Eigen::VectorXd& w, const GameCoefficients& gc,
                           double pinv_tol = 1e-12);

/// Exponential-weights step, computed in log space:
///   w'_j proportional to w_j exp(eta * clip(payoff_j, -clip, clip)).
Eigen::VectorXd mw_update(const Eigen::VectorXd& w, const Eigen::VectorXd& payoffs,
                          double eta, double payoff_clip);

struct SolverConfig {
  int iterations = 1000;
  std::optional<double> eta;  // default sqrt(log M / T)
  double payoff_clip = 1.0;
  double pinv_tol = 1e-12;

  void validate() const;
  double step_size(std::size_t num_groups) const;
};

struct IterationRecord {
  Eigen::VectorXd group_objectives;
  /// Certified bound on max_j g_j(running average) minus the game value, from
  /// quantities already computed in the iteration.
  double gap_bound = 0.0;
};

struct PhaseTimings {
  double build_seconds = 0.0;
  double erm_seconds = 0.0;
  double game_seconds = 0.0;
  double total_seconds = 0.0;
};

struct SolverResult {
  Eigen::VectorXd alpha_bar;
  Eigen::VectorXd w_bar;
  std::vector<IterationRecord> trace;
  double upper = 0.0;  // max_j g_j(alpha_bar)
  double lower = 0.0;  // min_alpha sum_j w_bar_j g_j(alpha)
  double gap = 0.0;    // upper - lower
  int projected_iterations = 0;
  PhaseTimings timings;
};

/// Multiplicative weights over groups against a best-responding learner.
/// Payoffs are divided by the running maximum |g_j| before the exponential
/// step. Outputs the averaged iterates.
SolverResult solve(const GameCoefficients& gc, const SolverConfig& cfg);

/// alpha^T phi(x).
double predict(const Eigen::VectorXd& alpha, const FeatureMap& fm,
               const Eigen::VectorXd& x);
/// sum_i alpha_i kappa(center_i, x) over the pooled training covariates.
double predict(const Eigen::VectorXd& alpha, const GroupKernelMatrices& km,
               const Eigen::VectorXd& x);

/// (1/n) sum_i [2 (y_i - h_i) f_i - a_n f_i^2].
double moment_violation(const Eigen::VectorXd& h, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& f, double a_n);

}  // namespace robust_moments
