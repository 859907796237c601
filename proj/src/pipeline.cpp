#include "robust_moments/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "robust_moments/common.hpp"

namespace robust_moments {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<IterationRecord> to_trace(const std::vector<OracleIterationRecord>& in) {
  std::vector<IterationRecord> out;
  out.reserve(in.size());
  for (const auto& r : in) out.push_back({r.group_objectives, r.gap_bound});
  return out;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kAdvMoment: return "adv-moment";
    case Method::kDro: return "dro";
    case Method::kMro: return "mro";
    case Method::kOracle: return "oracle";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kAdvMoment, Method::kDro, Method::kMro, Method::kOracle}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected adv-moment, dro, mro or oracle)");
}

std::string_view feature_choice_name(FeatureChoice f) {
  switch (f) {
    case FeatureChoice::kNystrom: return "nystrom";
    case FeatureChoice::kLinear: return "linear";
    case FeatureChoice::kRkhs: return "rkhs";
  }
  return "unknown";
}

FeatureChoice parse_feature_choice(std::string_view name) {
  for (FeatureChoice f : {FeatureChoice::kNystrom, FeatureChoice::kLinear, FeatureChoice::kRkhs}) {
    if (feature_choice_name(f) == name) return f;
  }
  throw ConfigError("unknown feature kind '" + std::string(name) +
                    "' (expected nystrom, linear or rkhs)");
}

void ExperimentConfig::validate() const {
  try {
    kernel.validate();
    coefficients.validate();
    solver.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (features == FeatureChoice::kNystrom && (nystrom_m < 1 || nystrom_r < 1 || nystrom_r > nystrom_m)) {
    throw ConfigError("need 1 <= nystrom_r <= nystrom_m");
  }
  if (features == FeatureChoice::kRkhs) {
    if (method != Method::kAdvMoment) {
      throw ConfigError("rkhs features are only supported by adv-moment; use nystrom features");
    }
    if (!(coefficients.lambda > 0.0)) throw ConfigError("rkhs features require lambda > 0");
  }
  if (method == Method::kOracle && !std::isfinite(coefficients.norm_bound)) {
    throw ConfigError("the oracle method needs a finite norm bound");
  }
}

Predictor FittedModel::predictor() const {
  if (features == FeatureChoice::kRkhs) {
    return [alpha = alpha, centers = centers, kernel = kernel](const Eigen::VectorXd& x) {
      if (x.size() != centers.cols()) throw ValidationError("predict: covariate dimension mismatch");
      return (kernel_matrix(x.transpose(), centers, kernel) * alpha)(0);
    };
  }
  return linear_predictor(alpha, feature_map);
}

Index FittedModel::input_dim() const {
  return features == FeatureChoice::kRkhs ? centers.cols() : feature_map.input_dim();
}

FittedModel fit_method(const GroupedDataset& ds, const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  FittedModel model;
  model.method = cfg.method;
  model.features = cfg.features;
  model.kernel = cfg.kernel;

  if (cfg.features == FeatureChoice::kRkhs) {
    const GroupKernelMatrices km = build_group_kernels(ds, cfg.kernel);
    const GameCoefficients gc = build_rkhs_coefficients(km, group_labels(ds), cfg.coefficients);
    model.timings.build_seconds = seconds_since(start);
    SolverResult r = solve(gc, cfg.solver);
    model.centers = km.centers;
    model.alpha = std::move(r.alpha_bar);
    model.w_bar = std::move(r.w_bar);
    model.upper = r.upper;
    model.lower = r.lower;
    model.gap = r.gap;
    model.trace = std::move(r.trace);
    model.timings.game_seconds = r.timings.game_seconds;
    model.timings.total_seconds = seconds_since(start);
    return model;
  }

  model.feature_map =
      cfg.features == FeatureChoice::kNystrom
          ? fit_nystrom(ds, cfg.kernel, cfg.nystrom_m, cfg.nystrom_r, cfg.seed)
          : FeatureMap::explicit_linear(ds.covariate_dim(), cfg.linear_intercept);
  const std::vector<Eigen::MatrixXd> features = group_features(ds, model.feature_map);
  const std::vector<Eigen::VectorXd> labels = group_labels(ds);

  switch (cfg.method) {
    case Method::kAdvMoment: {
      const GameCoefficients gc = build_linear_coefficients(features, labels, cfg.coefficients);
      model.timings.build_seconds = seconds_since(start);
      SolverResult r = solve(gc, cfg.solver);
      model.alpha = std::move(r.alpha_bar);
      model.w_bar = std::move(r.w_bar);
      model.upper = r.upper;
      model.lower = r.lower;
      model.gap = r.gap;
      model.trace = std::move(r.trace);
      model.timings.game_seconds = r.timings.game_seconds;
      break;
    }
    case Method::kDro:
    case Method::kMro: {
      model.timings.build_seconds = seconds_since(start);
      BaselineConfig bc;
      bc.solver = cfg.solver;
      bc.ridge = cfg.coefficients.lambda;
      BaselineResult r = solve_baseline(
          cfg.method == Method::kMro ? BaselineKind::kMro : BaselineKind::kGroupDro, features,
          labels, bc);
      model.alpha = std::move(r.alpha_bar);
      model.w_bar = std::move(r.w_bar);
      model.upper = r.upper;
      model.lower = r.lower;
      model.gap = r.gap;
      model.trace = std::move(r.trace);
      model.timings.erm_seconds = r.timings.erm_seconds;
      model.timings.game_seconds = r.timings.game_seconds;
      break;
    }
    case Method::kOracle: {
      const Oracles oracles = linear_ball_oracles(features, cfg.coefficients.norm_bound);
      model.timings.build_seconds = seconds_since(start);
      OracleSolverResult r = oracle_solve(ds, oracles, cfg.solver);
      model.alpha = std::move(r.coefficients_bar);
      model.w_bar = std::move(r.w_bar);
      model.upper = r.upper;
      model.lower = r.lower;
      model.gap = r.gap;
      model.trace = to_trace(r.trace);
      model.timings.game_seconds = r.timings.game_seconds;
      break;
    }
  }
  model.timings.total_seconds = seconds_since(start);
  return model;
}

FeatureMap evaluation_features(const FittedModel& model) {
  if (model.features == FeatureChoice::kRkhs) {
    return FeatureMap::explicit_linear(model.centers.cols(), true);
  }
  return model.feature_map;
}

Eigen::VectorXd erm_losses(const GroupedDataset& ds, const FittedModel& model) {
  std::vector<Eigen::MatrixXd> features;
  if (model.features == FeatureChoice::kRkhs) {
    for (const auto& g : ds.groups()) features.push_back(kernel_matrix(g.x, model.centers, model.kernel));
  } else {
    features = group_features(ds, model.feature_map);
  }
  const auto fits = group_erm(features, group_labels(ds), 0.0);
  Eigen::VectorXd out(static_cast<Index>(fits.size()));
  for (std::size_t j = 0; j < fits.size(); ++j) out(static_cast<Index>(j)) = fits[j].loss;
  return out;
}

}  // namespace robust_moments
