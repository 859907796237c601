#include "robust_moments/oracle_game.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "robust_moments/common.hpp"

namespace robust_moments {
namespace {

using Clock = std::chrono::steady_clock;

void check_shapes(const std::vector<Eigen::VectorXd>& values, const GroupedDataset& ds,
                  const char* what) {
  if (values.size() != ds.num_groups()) {
    throw SolverError(std::string(what) + " returned the wrong number of groups");
  }
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (values[j].size() != ds.group(j).size() || !values[j].allFinite()) {
      throw SolverError(std::string(what) + " returned bad evaluations for group " +
                        std::to_string(j));
    }
  }
}

Eigen::VectorXd worst_case_violations(const std::vector<Eigen::VectorXd>& alpha_bar,
                                      const std::vector<Eigen::VectorXd>& beta,
                                      const GroupedDataset& ds) {
  Eigen::VectorXd out(static_cast<Index>(ds.num_groups()));
  for (std::size_t j = 0; j < ds.num_groups(); ++j) {
    const auto& g = ds.group(j);
    out(static_cast<Index>(j)) =
        (2.0 * (g.y - alpha_bar[j]).dot(beta[j]) - beta[j].squaredNorm()) /
        static_cast<double>(g.size());
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& log_w) {
  Eigen::VectorXd w = (log_w.array() - log_w.maxCoeff()).exp().matrix();
  return w / w.sum();
}

}  // namespace

Oracles linear_ball_oracles(const std::vector<Eigen::MatrixXd>& features,
                            double norm_bound) {
  if (features.empty()) throw ValidationError("linear_ball_oracles: no groups");
  if (!(norm_bound > 0.0) || !std::isfinite(norm_bound)) {
    throw ValidationError("linear_ball_oracles: norm bound must be finite and > 0");
  }
  const Index d = features.front().cols();
  auto phi = std::make_shared<const std::vector<Eigen::MatrixXd>>(features);
  auto solvers = std::make_shared<std::vector<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>>>();
  for (const auto& f : features) {
    if (f.cols() != d) throw ValidationError("linear_ball_oracles: feature dimension differs");
    solvers->emplace_back(f);
  }

  Oracles out;
  out.linear_opt = [phi, d, norm_bound](const std::vector<Eigen::VectorXd>& c) {
    if (c.size() != phi->size()) throw ValidationError("linear oracle: group count mismatch");
    Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < c.size(); ++j) u.noalias() += (*phi)[j].transpose() * c[j];
    OracleHypothesis h;
    const double norm = u.norm();
    h.coefficients = norm > 0.0 ? Eigen::VectorXd(norm_bound * u / norm)
                                : Eigen::VectorXd(Eigen::VectorXd::Zero(d));
    for (const auto& f : *phi) h.evaluations.push_back(f * h.coefficients);
    return h;
  };
  out.regression = [phi, solvers](std::size_t j, const Eigen::VectorXd& r) {
    const Eigen::VectorXd beta = solvers->at(j).solve(r);
    return Eigen::VectorXd((*phi)[j] * beta);
  };
  return out;
}

RegressionOracle constant_regression_oracle() {
  return [](std::size_t, const Eigen::VectorXd& r) {
    return Eigen::VectorXd::Constant(r.size(), r.size() > 0 ? r.mean() : 0.0).eval();
  };
}

double oracle_objective(const std::vector<Eigen::VectorXd>& alpha,
                        const Eigen::VectorXd& w,
                        const std::vector<Eigen::VectorXd>& beta,
                        const std::vector<Eigen::VectorXd>& labels) {
  double total = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const double n = static_cast<double>(labels[j].size());
    total += w(static_cast<Index>(j)) *
             (2.0 * (labels[j] - alpha[j]).dot(beta[j]) - beta[j].squaredNorm()) / n;
  }
  return total;
}

OracleHypothesis oracle_best_response(const OracleGameState& state,
                                      const Oracles& oracles,
                                      const GroupedDataset& ds) {
  std::vector<Eigen::VectorXd> weights(ds.num_groups());
  for (std::size_t j = 0; j < ds.num_groups(); ++j) {
    weights[j] = state.beta[j] * (state.w(static_cast<Index>(j)) /
                                  static_cast<double>(ds.group(j).size()));
  }
  OracleHypothesis h = oracles.linear_opt(weights);
  check_shapes(h.evaluations, ds, "linear optimization oracle");
  return h;
}

std::vector<Eigen::VectorXd> ftl_adversary_update(const OracleGameState& state,
                                                  const Oracles& oracles,
                                                  const GroupedDataset& ds) {
  std::vector<Eigen::VectorXd> beta(ds.num_groups());
  parallel_for(ds.num_groups(), [&](std::size_t j) {
    beta[j] = oracles.regression(j, ds.group(j).y - state.alpha_bar[j]);
  });
  check_shapes(beta, ds, "regression oracle");
  return beta;
}

OracleSolverResult oracle_solve(const GroupedDataset& ds, const Oracles& oracles,
                                const SolverConfig& cfg) {
  cfg.validate();
  if (!oracles.linear_opt || !oracles.regression) {
    throw ValidationError("oracle_solve: both oracles are required");
  }
  const auto start = Clock::now();
  const std::size_t m = ds.num_groups();
  const auto mi = static_cast<Index>(m);
  const double eta = cfg.step_size(m);
  const auto labels = group_labels(ds);

  OracleGameState state;
  state.w = Eigen::VectorXd::Constant(mi, 1.0 / static_cast<double>(m));
  for (std::size_t j = 0; j < m; ++j) {
    state.beta.push_back(Eigen::VectorXd::Zero(ds.group(j).size()));
    state.alpha_bar.push_back(Eigen::VectorXd::Zero(ds.group(j).size()));
  }

  // Counting wrappers, so the accounting reflects actual oracle invocations.
  long linear_calls = 0;
  std::atomic<long> regression_calls = 0;
  Oracles counted;
  counted.linear_opt = [&](const std::vector<Eigen::VectorXd>& c) {
    ++linear_calls;
    return oracles.linear_opt(c);
  };
  counted.regression = [&](std::size_t j, const Eigen::VectorXd& r) {
    ++regression_calls;  // may run on worker threads
    return oracles.regression(j, r);
  };

  OracleSolverResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  Eigen::VectorXd log_w = Eigen::VectorXd::Zero(mi);
  Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(mi);
  std::vector<Eigen::VectorXd> weighted_beta_sum(m);
  for (std::size_t j = 0; j < m; ++j) weighted_beta_sum[j] = Eigen::VectorXd::Zero(ds.group(j).size());
  Eigen::VectorXd coef_sum;
  bool have_coefficients = true;
  double best_lower = -std::numeric_limits<double>::infinity();
  double scale = 0.0;
  Eigen::VectorXd upper_values;

  for (int t = 1; t <= cfg.iterations; ++t) {
    const long linear_before = linear_calls;
    const long regression_before = regression_calls;
    OracleIterationRecord rec;
    try {
      const OracleHypothesis h = oracle_best_response(state, counted, ds);
      if (h.coefficients.size() == 0) have_coefficients = false;
      if (have_coefficients) {
        if (coef_sum.size() == 0) coef_sum = Eigen::VectorXd::Zero(h.coefficients.size());
        coef_sum += h.coefficients;
      }
      best_lower = std::max(best_lower,
                            oracle_objective(h.evaluations, state.w, state.beta, labels));
      w_sum += state.w;
      for (std::size_t j = 0; j < m; ++j) {
        weighted_beta_sum[j] += state.w(static_cast<Index>(j)) * state.beta[j];
        state.alpha_bar[j] += (h.evaluations[j] - state.alpha_bar[j]) / t;
      }
      state.t = t;

      const std::vector<Eigen::VectorXd> next_beta = ftl_adversary_update(state, counted, ds);
      Eigen::VectorXd payoff(mi);
      for (std::size_t j = 0; j < m; ++j) {
        payoff(static_cast<Index>(j)) =
            (2.0 * (labels[j] - h.evaluations[j]).dot(next_beta[j]) -
             next_beta[j].squaredNorm()) /
            static_cast<double>(labels[j].size());
      }
      upper_values = worst_case_violations(state.alpha_bar, next_beta, ds);
      state.beta = next_beta;

      scale = std::max(scale, payoff.cwiseAbs().maxCoeff());
      if (scale > 0.0) {
        for (Index j = 0; j < mi; ++j) {
          log_w(j) += eta * std::clamp(payoff(j) / scale, -cfg.payoff_clip, cfg.payoff_clip);
        }
        log_w.array() -= log_w.maxCoeff();
      }
      state.w = softmax(log_w);
    } catch (const SolverError& e) {
      throw SolverError("oracle game iteration " + std::to_string(t) + ": " + e.what());
    } catch (const std::exception& e) {
      throw SolverError("oracle failure at iteration " + std::to_string(t) + ": " + e.what());
    }
    rec.group_objectives = upper_values;
    rec.gap_bound = upper_values.maxCoeff() - best_lower;
    rec.linear_opt_calls = static_cast<int>(linear_calls - linear_before);
    rec.regression_calls = static_cast<int>(regression_calls - regression_before);
    result.trace.push_back(std::move(rec));
  }

  result.linear_opt_calls = linear_calls;
  result.regression_calls = regression_calls;
  result.alpha_bar = state.alpha_bar;
  result.w_bar = w_sum / cfg.iterations;
  if (have_coefficients) result.coefficients_bar = coef_sum / cfg.iterations;
  result.upper = upper_values.maxCoeff();

  // Lower certificate: the averaged adversary (w_bar, beta_hat) with
  // beta_hat_j the w-weighted average of beta_{t,j}. By concavity in beta,
  // min_alpha L(alpha, w_bar, beta_hat) is at most the game value.
  OracleGameState mixed;
  mixed.w = result.w_bar;
  for (std::size_t j = 0; j < m; ++j) {
    const double mass = w_sum(static_cast<Index>(j));
    mixed.beta.push_back(mass > 0.0 ? Eigen::VectorXd(weighted_beta_sum[j] / mass)
                                    : Eigen::VectorXd(Eigen::VectorXd::Zero(ds.group(j).size())));
  }
  try {
    const OracleHypothesis h = oracle_best_response(mixed, oracles, ds);
    ++result.certificate_calls;
    best_lower = std::max(best_lower, oracle_objective(h.evaluations, mixed.w, mixed.beta, labels));
  } catch (const std::exception& e) {
    throw SolverError(std::string("oracle failure in the final certificate: ") + e.what());
  }
  result.lower = best_lower;
  result.gap = result.upper - result.lower;
  result.timings.game_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  result.timings.total_seconds = result.timings.game_seconds;
  return result;
}

}  // namespace robust_moments
