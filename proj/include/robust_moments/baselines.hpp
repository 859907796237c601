#pragma once

#include <Eigen/Dense>
#include <vector>

#include "robust_moments/dataset.hpp"
#include "robust_moments/features.hpp"
#include "robust_moments/moment_game.hpp"

namespace robust_moments {

enum class BaselineKind { kGroupDro, kMro };

struct GroupErm {
  Eigen::VectorXd alpha;
  double loss = 0.0;       // mean square loss, unpenalized
  double objective = 0.0;  // loss + ridge * ||alpha||^2
};

/// Per-group ridge regression: alpha_j minimizes
/// (1/n_j) ||y_j - Phi_j alpha||^2 + ridge ||alpha||^2. With ridge = 0 the
/// minimum-norm least-squares solution is returned.
std::vector<GroupErm> group_erm(const std::vector<Eigen::MatrixXd>& features,
                                const std::vector<Eigen::VectorXd>& labels,
                                double ridge);
std::vector<GroupErm> group_erm(const GroupedDataset& ds, const FeatureMap& fm,
                                double ridge);

struct BaselineConfig {
  SolverConfig solver;
  double ridge = 0.0;

  void validate() const;
};

struct BaselineResult {
  Eigen::VectorXd alpha_bar;
  Eigen::VectorXd w_bar;
  std::vector<GroupErm> erm;  // MRO only
  std::vector<IterationRecord> trace;
  double upper = 0.0;
  double lower = 0.0;
  double gap = 0.0;
  PhaseTimings timings;
};

/// Multiplicative weights over groups against a weighted ridge regression
/// learner. Payoff of group j at alpha is its penalized mean square loss
/// (group DRO), or that minus the group's own penalized ERM objective (MRO).
/// The learner's normal equations are rebuilt from the raw per-sample
/// features at every iteration; MRO fits the M ERMs once, up front, timed as
/// the ERM phase.
BaselineResult solve_baseline(BaselineKind kind,
                              const std::vector<Eigen::MatrixXd>& features,
                              const std::vector<Eigen::VectorXd>& labels,
                              const BaselineConfig& cfg);
BaselineResult solve_baseline(BaselineKind kind, const GroupedDataset& ds,
                              const FeatureMap& fm, const BaselineConfig& cfg);

/// Penalized mean square loss of each group at alpha.
Eigen::VectorXd group_ridge_losses(const std::vector<Eigen::MatrixXd>& features,
                                   const std::vector<Eigen::VectorXd>& labels,
                                   const Eigen::VectorXd& alpha, double ridge);

}  // namespace robust_moments
