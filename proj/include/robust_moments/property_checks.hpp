#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robust_moments/evaluation.hpp"
#include "robust_moments/rng.hpp"

namespace robust_moments {

struct CheckOptions {
  std::uint64_t seed = 20240601;
  /// Flips the sign of the completing-square right-hand side, so that the
  /// check is expected to fail. Used to test the checker itself.
  bool inject_fault = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Random finite instance: a distribution over `domain` covariate points with
/// one or two labels per point, a hypothesis h and `functions` test functions.
struct FiniteInstance {
  DiscreteDistribution dist;
  Eigen::VectorXd h;
  std::vector<Eigen::VectorXd> test_functions;
  double c = 1.0;
};
FiniteInstance random_finite_instance(Rng& rng, int domain, int functions, double c);

CheckResult check_completing_square(const CheckOptions& opts, int instances = 100);
CheckResult check_sandwich_upper(const CheckOptions& opts, int instances = 100);
CheckResult check_sandwich_lower(const CheckOptions& opts, int instances = 100);
CheckResult check_realizable_equivalence(const CheckOptions& opts, int instances = 100);
CheckResult check_linear_inner_max(const CheckOptions& opts);
CheckResult check_mw_shift_invariance(const CheckOptions& opts);
CheckResult check_best_response_stationarity(const CheckOptions& opts);
CheckResult check_payoff_convexity(const CheckOptions& opts);
CheckResult check_nystrom_exactness(const CheckOptions& opts);
CheckResult check_duality_gap_rate(const CheckOptions& opts);

/// Random linear game with M groups of n samples and d features; labels are
/// a noisy, group-dependent linear function of the features.
GameCoefficients random_linear_game(Rng& rng, int groups, int samples, int dim,
                                    const CoefficientOptions& opts);

/// Gaps at the given horizons and the least-squares slope of log gap on log T.
struct GapRate {
  std::vector<int> horizons;
  std::vector<double> gaps;
  double slope = 0.0;
};
GapRate measure_gap_rate(const GameCoefficients& gc, const std::vector<int>& horizons);

/// Every check above, in a fixed order.
std::vector<CheckResult> run_all_checks(const CheckOptions& opts);

}  // namespace robust_moments
