#include "robust_moments/baselines.hpp"

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

void check_inputs(const std::vector<Eigen::MatrixXd>& features,
                  const std::vector<Eigen::VectorXd>& labels) {
  if (features.empty() || features.size() != labels.size()) {
    throw ValidationError("need one feature matrix and label vector per group");
  }
  const Index d = features.front().cols();
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].cols() != d) throw ValidationError("feature dimension differs across groups");
    if (features[j].rows() != labels[j].size() || labels[j].size() == 0) {
      throw ValidationError("group " + std::to_string(j) + ": feature/label size mismatch");
    }
  }
}

// Minimizer of sum_j (w_j/n_j) ||y_j - Phi_j alpha||^2 + ridge ||alpha||^2,
// assembled from the per-sample features.
Eigen::VectorXd weighted_ridge(const std::vector<Eigen::MatrixXd>& features,
                               const std::vector<Eigen::VectorXd>& labels,
                               const Eigen::VectorXd& w, double ridge) {
  const Index d = features.front().cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  double total = 0.0;
  for (std::size_t j = 0; j < features.size(); ++j) {
    const double weight = w(static_cast<Index>(j)) / static_cast<double>(labels[j].size());
    if (weight == 0.0) continue;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(features[j].transpose(), weight);
    rhs.noalias() += weight * (features[j].transpose() * labels[j]);
    total += w(static_cast<Index>(j));
  }
  gram.diagonal().array() += ridge * total;
  if (ridge > 0.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
  }
  const Eigen::MatrixXd full = gram.selfadjointView<Eigen::Lower>();
  return linalg::pinv_solve(full, rhs, 1e-12);
}

}  // namespace

Eigen::VectorXd group_ridge_losses(const std::vector<Eigen::MatrixXd>& features,
                                   const std::vector<Eigen::VectorXd>& labels,
                                   const Eigen::VectorXd& alpha, double ridge) {
  Eigen::VectorXd out(static_cast<Index>(features.size()));
  const double penalty = ridge * alpha.squaredNorm();
  for (std::size_t j = 0; j < features.size(); ++j) {
    out(static_cast<Index>(j)) =
        (labels[j] - features[j] * alpha).squaredNorm() /
            static_cast<double>(labels[j].size()) +
        penalty;
  }
  return out;
}

std::vector<GroupErm> group_erm(const std::vector<Eigen::MatrixXd>& features,
                                const std::vector<Eigen::VectorXd>& labels,
                                double ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValidationError("ridge must be >= 0");
  check_inputs(features, labels);
  std::vector<GroupErm> out(features.size());
  parallel_for(features.size(), [&](std::size_t j) {
    const Eigen::MatrixXd& phi = features[j];
    const Eigen::VectorXd& y = labels[j];
    const auto n = static_cast<double>(y.size());
    GroupErm& e = out[j];
    if (ridge == 0.0) {
      e.alpha = phi.completeOrthogonalDecomposition().solve(y);
    } else {
      Eigen::MatrixXd gram = phi.transpose() * phi / n;
      gram.diagonal().array() += ridge;
      e.alpha = gram.llt().solve(phi.transpose() * y / n);
    }
    e.loss = (y - phi * e.alpha).squaredNorm() / n;
    e.objective = e.loss + ridge * e.alpha.squaredNorm();
  });
  return out;
}

std::vector<GroupErm> group_erm(const GroupedDataset& ds, const FeatureMap& fm,
                                double ridge) {
  return group_erm(group_features(ds, fm), group_labels(ds), ridge);
}

void BaselineConfig::validate() const {
  solver.validate();
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ValidationError("ridge must be >= 0");
}

BaselineResult solve_baseline(BaselineKind kind,
                              const std::vector<Eigen::MatrixXd>& features,
                              const std::vector<Eigen::VectorXd>& labels,
                              const BaselineConfig& cfg) {
  cfg.validate();
  check_inputs(features, labels);
  const auto start = Clock::now();
  const auto m = static_cast<Index>(features.size());
  const Index d = features.front().cols();

  BaselineResult result;
  Eigen::VectorXd offsets = Eigen::VectorXd::Zero(m);
  if (kind == BaselineKind::kMro) {
    const auto erm_start = Clock::now();
    result.erm = group_erm(features, labels, cfg.ridge);
    for (Index j = 0; j < m; ++j) offsets(j) = result.erm[static_cast<std::size_t>(j)].objective;
    result.timings.erm_seconds = seconds_since(erm_start);
  }
  auto payoffs = [&](const Eigen::VectorXd& alpha) {
    return Eigen::VectorXd(group_ridge_losses(features, labels, alpha, cfg.ridge) - offsets);
  };

  const auto game_start = Clock::now();
  const SolverConfig& sc = cfg.solver;
  const double eta = sc.step_size(features.size());
  Eigen::VectorXd log_w = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd alpha_sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd payoff_sum = Eigen::VectorXd::Zero(m);
  double realized_sum = 0.0;
  double scale = 0.0;
  result.trace.reserve(static_cast<std::size_t>(sc.iterations));

  for (int t = 1; t <= sc.iterations; ++t) {
    Eigen::VectorXd w = (log_w.array() - log_w.maxCoeff()).exp().matrix();
    w /= w.sum();
    const Eigen::VectorXd alpha = weighted_ridge(features, labels, w, cfg.ridge);
    const Eigen::VectorXd g = payoffs(alpha);
    alpha_sum += alpha;
    w_sum += w;
    payoff_sum += g;
    realized_sum += w.dot(g);
    result.trace.push_back({g, (payoff_sum.maxCoeff() - realized_sum) / t});

    scale = std::max(scale, g.cwiseAbs().maxCoeff());
    if (scale > 0.0) {
      for (Index j = 0; j < m; ++j) {
        log_w(j) += eta * std::clamp(g(j) / scale, -sc.payoff_clip, sc.payoff_clip);
      }
      log_w.array() -= log_w.maxCoeff();
    }
  }

  result.alpha_bar = alpha_sum / sc.iterations;
  result.w_bar = w_sum / sc.iterations;
  result.upper = payoffs(result.alpha_bar).maxCoeff();
  result.lower =
      result.w_bar.dot(payoffs(weighted_ridge(features, labels, result.w_bar, cfg.ridge)));
  result.gap = result.upper - result.lower;
  result.timings.game_seconds = seconds_since(game_start);
  result.timings.total_seconds = seconds_since(start);
  return result;
}

BaselineResult solve_baseline(BaselineKind kind, const GroupedDataset& ds,
                              const FeatureMap& fm, const BaselineConfig& cfg) {
  return solve_baseline(kind, group_features(ds, fm), group_labels(ds), cfg);
}

}  // namespace robust_moments
