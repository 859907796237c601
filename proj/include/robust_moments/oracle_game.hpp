#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "robust_moments/dataset.hpp"
#include "robust_moments/moment_game.hpp"

namespace robust_moments {

/// A hypothesis returned by the linear optimization oracle, given by its
/// values on every training sample (one vector per group). `coefficients` is
/// optional and only filled by oracles over a parametric class.
struct OracleHypothesis {
  std::vector<Eigen::VectorXd> evaluations;
  Eigen::VectorXd coefficients;
};

/// Given per-sample weights c_ij, returns h in H minimizing -sum_ij c_ij h(x_ij).
using LinearOptOracle =
    std::function<OracleHypothesis(const std::vector<Eigen::VectorXd>& sample_weights)>;

/// Given a group index and targets r (one per sample of that group), returns
/// the evaluations on that group of f in F minimizing sum_i (r_i - f(x_i))^2.
using RegressionOracle =
    std::function<Eigen::VectorXd(std::size_t group, const Eigen::VectorXd& targets)>;

/// The caller is responsible for F containing star(H - H) on the samples.
struct Oracles {
  LinearOptOracle linear_opt;
  RegressionOracle regression;
};

/// Reference oracles for H = {alpha^T phi : ||alpha|| <= A} and F the
/// (unconstrained) linear span of phi. The linear oracle returns
/// alpha = A u / ||u|| with u = sum_ij c_ij phi(x_ij) (zero when u = 0); the
/// regression oracle is the minimum-norm least-squares fit.
Oracles linear_ball_oracles(const std::vector<Eigen::MatrixXd>& features,
                            double norm_bound);

/// Regression oracle over constant functions: every evaluation is the mean
/// of the targets.
RegressionOracle constant_regression_oracle();

/// Adversary state of the oracle dynamics.
struct OracleGameState {
  Eigen::VectorXd w;
  std::vector<Eigen::VectorXd> beta;       // beta_{t,j}, evaluations of f_j
  std::vector<Eigen::VectorXd> alpha_bar;  // running average of learner evaluations
  int t = 0;
};

/// L(alpha, w, beta) = sum_j (w_j / n_j) (2 (y_j - alpha_j)^T beta_j - ||beta_j||^2).
double oracle_objective(const std::vector<Eigen::VectorXd>& alpha,
                        const Eigen::VectorXd& w,
                        const std::vector<Eigen::VectorXd>& beta,
                        const std::vector<Eigen::VectorXd>& labels);

/// Learner best response to (w, beta): one linear-opt oracle call with
/// sample weights w_j beta_ij / n_j.
OracleHypothesis oracle_best_response(const OracleGameState& state,
                                      const Oracles& oracles,
                                      const GroupedDataset& ds);

/// Follow-the-leader adversary: beta_j = ORACLE_F(y_j - alpha_bar_j) for each
/// group (M regression calls).
std::vector<Eigen::VectorXd> ftl_adversary_update(const OracleGameState& state,
                                                  const Oracles& oracles,
                                                  const GroupedDataset& ds);

struct OracleIterationRecord {
  /// (1/n_j)(2 (y_j - alpha_bar_j)^T beta_{t+1,j} - ||beta_{t+1,j}||^2): the
  /// worst-case violation of the running average on each group.
  Eigen::VectorXd group_objectives;
  double gap_bound = 0.0;
  int linear_opt_calls = 0;
  int regression_calls = 0;
};

struct OracleSolverResult {
  std::vector<Eigen::VectorXd> alpha_bar;  // averaged learner evaluations
  Eigen::VectorXd coefficients_bar;        // averaged coefficients, if exposed
  Eigen::VectorXd w_bar;
  std::vector<OracleIterationRecord> trace;
  double upper = 0.0;
  double lower = 0.0;
  double gap = 0.0;
  long linear_opt_calls = 0;  // inside the iterations
  long regression_calls = 0;
  long certificate_calls = 0;  // extra linear-opt calls for the lower bound
  PhaseTimings timings;
};

/// No-regret dynamics with a best-responding learner, multiplicative weights
/// over groups and follow-the-leader test functions. beta_1 = 0. The
/// exponential-weights payoffs are normalized by the running max |payoff|
/// as in `solve`. Oracle exceptions are rethrown as SolverError naming the
/// iteration.
OracleSolverResult oracle_solve(const GroupedDataset& ds, const Oracles& oracles,
                                const SolverConfig& cfg);

}  // namespace robust_moments
