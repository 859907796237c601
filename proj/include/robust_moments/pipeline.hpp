#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "robust_moments/baselines.hpp"
#include "robust_moments/dataset.hpp"
#include "robust_moments/evaluation.hpp"
#include "robust_moments/features.hpp"
#include "robust_moments/moment_game.hpp"
#include "robust_moments/oracle_game.hpp"

namespace robust_moments {

enum class Method { kAdvMoment, kDro, kMro, kOracle };

/// "adv-moment", "dro", "mro", "oracle".
std::string_view method_name(Method m);
/// Throws ConfigError for unknown names.
Method parse_method(std::string_view name);

enum class FeatureChoice { kNystrom, kLinear, kRkhs };

std::string_view feature_choice_name(FeatureChoice f);
FeatureChoice parse_feature_choice(std::string_view name);

/// Everything needed to fit one method on one dataset.
struct ExperimentConfig {
  Method method = Method::kAdvMoment;
  FeatureChoice features = FeatureChoice::kNystrom;
  KernelConfig kernel;
  Index nystrom_m = 100;
  Index nystrom_r = 100;
  bool linear_intercept = true;
  CoefficientOptions coefficients;
  SolverConfig solver;
  std::uint64_t seed = 0;  // Nystrom landmark draw

  void validate() const;
};

struct FittedModel {
  Method method = Method::kAdvMoment;
  FeatureChoice features = FeatureChoice::kNystrom;
  FeatureMap feature_map;       // linear and Nystrom models
  Eigen::MatrixXd centers;      // RKHS models: pooled training covariates
  KernelConfig kernel;          // RKHS models
  Eigen::VectorXd alpha;
  Eigen::VectorXd w_bar;
  double upper = 0.0;
  double lower = 0.0;
  double gap = 0.0;
  std::vector<IterationRecord> trace;
  PhaseTimings timings;

  Predictor predictor() const;
  /// Covariate dimension the model expects.
  Index input_dim() const;
};

/// Featurizes the dataset (Nystrom fit or explicit map), then runs the chosen
/// solver. Timings: build = featurization and coefficient construction,
/// erm = MRO's per-group fits, game = the iteration loop, total = all of it.
FittedModel fit_method(const GroupedDataset& ds, const ExperimentConfig& cfg);

/// Feature map the model's test-function ball is built on: the model's own
/// map, or an explicit linear map for RKHS models.
FeatureMap evaluation_features(const FittedModel& model);

/// Per-group minimum square loss over the model's feature class (ridge 0).
Eigen::VectorXd erm_losses(const GroupedDataset& ds, const FittedModel& model);

}  // namespace robust_moments
