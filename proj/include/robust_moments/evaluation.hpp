#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "robust_moments/baselines.hpp"
#include "robust_moments/dataset.hpp"
#include "robust_moments/features.hpp"
#include "robust_moments/moment_game.hpp"

namespace robust_moments {

/// A fitted hypothesis x -> h(x).
using Predictor = std::function<double(const Eigen::VectorXd&)>;

Predictor linear_predictor(Eigen::VectorXd alpha, FeatureMap fm);

/// h evaluated on every row of x.
Eigen::VectorXd predict_rows(const Predictor& h, const Eigen::MatrixXd& x);

/// Per-group mean of (h(x) - h0(x))^2 over the group's samples. Requires
/// ground truth (synthetic data); throws ValidationError when `gt` is null.
Eigen::VectorXd mse_to_h0(const Predictor& h, const GroundTruth* gt,
                          const GroupedDataset& ds);

/// Per-group mean square loss.
Eigen::VectorXd group_square_losses(const Predictor& h, const GroupedDataset& ds);

/// Linear test functions beta^T phi with ||beta|| <= bound.
struct TestFunctionBall {
  FeatureMap features;
  double bound = 1.0;

  void validate() const;
};

/// sup over the ball of |E_j[(y - h(x)) f(x)]|, per group:
///   bound * || (1/n_j) sum_i (y_i - h(x_i)) phi(x_i) ||.
Eigen::VectorXd multiaccuracy_error(const Predictor& h, const GroupedDataset& ds,
                                    const TestFunctionBall& ball);

struct WorstGroup {
  std::size_t group = 0;
  double value = 0.0;
};

/// Maximum entry; ties go to the lowest index.
WorstGroup worst_group(const Eigen::VectorXd& values);

struct EvalReport {
  Eigen::VectorXd square_loss;
  Eigen::VectorXd regret;  // square_loss - b_j
  Eigen::VectorXd multiaccuracy;
  std::optional<Eigen::VectorXd> mse_to_h0;
  WorstGroup worst_square_loss;
  WorstGroup worst_regret;
  WorstGroup worst_multiaccuracy;
  std::optional<WorstGroup> worst_mse_to_h0;
  std::optional<double> gap;
  std::vector<std::pair<double, double>> fit_curve;  // (x, h(x)); empty unless p = 1
};

/// `erm_losses` are the per-group minimum losses b_j (see group_erm with
/// ridge 0). The fit curve is only produced for scalar covariates.
EvalReport evaluate(const Predictor& h, const GroupedDataset& ds,
                    const Eigen::VectorXd& erm_losses, const TestFunctionBall& ball,
                    const GroundTruth* gt = nullptr,
                    std::optional<double> gap = std::nullopt);

/// h on `points` uniformly spaced values of [lo, hi] (scalar covariates).
std::vector<std::pair<double, double>> fit_curve(const Predictor& h, int points = 201,
                                                 double lo = -1.0, double hi = 1.0);

struct BruteForceResult {
  Eigen::VectorXd alpha;
  double value = 0.0;
  double step = 0.0;
  double lipschitz = 0.0;
  /// lipschitz * step * sqrt(d): the grid optimum exceeds the true minimum
  /// over the region by at most this much.
  double error_bound = 0.0;
};

/// Exhaustive minimum of max_j g_j(alpha) over a `grid`^d lattice on
/// [-A, A]^d, keeping only points with ||alpha|| <= A when `ball` is set.
/// d <= 2 and grid <= 1000.
BruteForceResult brute_force_minmax(const GameCoefficients& gc, int grid, double half_width,
                                    bool ball = true);

/// Finite joint distribution of (x, y): atom i sits at covariate index
/// x[i] in {0, ..., domain - 1} with label y[i] and probability prob[i].
/// Functions of x are vectors of length `domain`.
struct DiscreteDistribution {
  int domain = 0;
  std::vector<int> x;
  Eigen::VectorXd y;
  Eigen::VectorXd prob;

  void validate() const;
  /// P(X = x) for every x in the domain.
  Eigen::VectorXd marginal() const;
  /// E[Y | X = x]; zero where P(X = x) = 0.
  Eigen::VectorXd conditional_mean() const;
  /// sum_x P(X = x) g(x)^2.
  double sq_norm(const Eigen::VectorXd& g) const;
};

/// max over f in F of E[2 (Y - h(X)) f(X) - c f(X)^2], by enumeration.
double enumerate_adversarial_value(const DiscreteDistribution& dist, const Eigen::VectorXd& h,
                                   const std::vector<Eigen::VectorXd>& test_functions,
                                   double c);

/// (1/c) ||h0 - h||^2 - (1/c) min_f ||h0 - h - c f||^2 with h0 the
/// conditional mean, norms in L2 of the marginal. Requires c > 0.
double completing_square_rhs(const DiscreteDistribution& dist, const Eigen::VectorXd& h,
                             const std::vector<Eigen::VectorXd>& test_functions, double c);

}  // namespace robust_moments
