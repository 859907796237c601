#include "robust_moments/evaluation.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "robust_moments/common.hpp"

namespace robust_moments {

Predictor linear_predictor(Eigen::VectorXd alpha, FeatureMap fm) {
  if (alpha.size() != fm.dim()) {
    throw ValidationError("model has " + std::to_string(alpha.size()) +
                          " coefficients but the feature map has dimension " +
                          std::to_string(fm.dim()));
  }
  return [alpha = std::move(alpha), fm = std::move(fm)](const Eigen::VectorXd& x) {
    return alpha.dot(fm.apply(x));
  };
}

Eigen::VectorXd predict_rows(const Predictor& h, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = h(x.row(i).transpose());
  return out;
}

Eigen::VectorXd mse_to_h0(const Predictor& h, const GroundTruth* gt,
                          const GroupedDataset& ds) {
  if (gt == nullptr) throw ValidationError("mse_to_h0 needs ground truth (synthetic data only)");
  if (gt->num_groups() != ds.num_groups() || ds.covariate_dim() != 1) {
    throw ValidationError("ground truth does not match the dataset");
  }
  Eigen::VectorXd out(static_cast<Index>(ds.num_groups()));
  for (std::size_t j = 0; j < ds.num_groups(); ++j) {
    const Group& g = ds.group(j);
    const Eigen::VectorXd pred = predict_rows(h, g.x);
    double sum = 0.0;
    for (Index i = 0; i < g.size(); ++i) {
      const double diff = pred(i) - gt->h0(j, g.x(i, 0));
      sum += diff * diff;
    }
    out(static_cast<Index>(j)) = sum / static_cast<double>(g.size());
  }
  return out;
}

Eigen::VectorXd group_square_losses(const Predictor& h, const GroupedDataset& ds) {
  Eigen::VectorXd out(static_cast<Index>(ds.num_groups()));
  for (std::size_t j = 0; j < ds.num_groups(); ++j) {
    const Group& g = ds.group(j);
    out(static_cast<Index>(j)) =
        (g.y - predict_rows(h, g.x)).squaredNorm() / static_cast<double>(g.size());
  }
  return out;
}

void TestFunctionBall::validate() const {
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw ValidationError("test-function ball bound must be finite and > 0");
  }
}

Eigen::VectorXd multiaccuracy_error(const Predictor& h, const GroupedDataset& ds,
                                    const TestFunctionBall& ball) {
  ball.validate();
  Eigen::VectorXd out(static_cast<Index>(ds.num_groups()));
  for (std::size_t j = 0; j < ds.num_groups(); ++j) {
    const Group& g = ds.group(j);
    const Eigen::VectorXd resid = g.y - predict_rows(h, g.x);
    const Eigen::MatrixXd phi = ball.features.apply_rows(g.x);
    out(static_cast<Index>(j)) =
        ball.bound * (phi.transpose() * resid).norm() / static_cast<double>(g.size());
  }
  return out;
}

WorstGroup worst_group(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw ValidationError("worst_group: no groups");
  WorstGroup out{0, values(0)};
  for (Index j = 1; j < values.size(); ++j) {
    if (values(j) > out.value) out = {static_cast<std::size_t>(j), values(j)};
  }
  return out;
}

std::vector<std::pair<double, double>> fit_curve(const Predictor& h, int points, double lo,
                                                 double hi) {
  if (points < 2) throw ValidationError("fit curve needs at least 2 points");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(points));
  Eigen::VectorXd x(1);
  for (int i = 0; i < points; ++i) {
    x(0) = i + 1 == points ? hi : lo + (hi - lo) * i / (points - 1);
    out.emplace_back(x(0), h(x));
  }
  return out;
}

EvalReport evaluate(const Predictor& h, const GroupedDataset& ds,
                    const Eigen::VectorXd& erm_losses, const TestFunctionBall& ball,
                    const GroundTruth* gt, std::optional<double> gap) {
  if (erm_losses.size() != static_cast<Index>(ds.num_groups())) {
    throw ValidationError("need one ERM loss per group");
  }
  EvalReport r;
  r.square_loss = group_square_losses(h, ds);
  r.regret = r.square_loss - erm_losses;
  r.multiaccuracy = multiaccuracy_error(h, ds, ball);
  r.worst_square_loss = worst_group(r.square_loss);
  r.worst_regret = worst_group(r.regret);
  r.worst_multiaccuracy = worst_group(r.multiaccuracy);
  if (gt != nullptr) {
    r.mse_to_h0 = mse_to_h0(h, gt, ds);
    r.worst_mse_to_h0 = worst_group(*r.mse_to_h0);
  }
  r.gap = gap;
  if (ds.covariate_dim() == 1) r.fit_curve = fit_curve(h);
  return r;
}

BruteForceResult brute_force_minmax(const GameCoefficients& gc, int grid, double half_width,
                                    bool ball) {
  gc.validate();
  const Index d = gc.dim();
  if (d > 2) throw ValidationError("brute_force_minmax supports d <= 2 only");
  if (grid < 2 || grid > 1000) throw ValidationError("grid must be in [2, 1000] per axis");
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw ValidationError("brute_force_minmax: half width must be finite and > 0");
  }
  BruteForceResult out;
  out.step = 2.0 * half_width / (grid - 1);
  out.value = std::numeric_limits<double>::infinity();
  const Index rows = d == 2 ? grid : 1;
  Eigen::VectorXd alpha(d);
  for (Index a = 0; a < grid; ++a) {
    for (Index b = 0; b < rows; ++b) {
      alpha(0) = -half_width + out.step * static_cast<double>(a);
      if (d == 2) alpha(1) = -half_width + out.step * static_cast<double>(b);
      if (ball && alpha.norm() > half_width * (1.0 + 1e-12)) continue;
      const double v = gc.worst_group_objective(alpha);
      if (v < out.value) {
        out.value = v;
        out.alpha = alpha;
      }
    }
  }
  // |grad g_j| = (2/n_j) |Sigma_j alpha - nu_j| <= (2/n_j)(|Sigma_j| R + |nu_j|)
  // over the box, R = A sqrt(d).
  const double radius = half_width * std::sqrt(static_cast<double>(d));
  for (const auto& g : gc.groups) {
    const double op_norm = g.sigma.jacobiSvd().singularValues()(0);
    out.lipschitz = std::max(
        out.lipschitz, 2.0 * (op_norm * radius + g.nu.norm()) / static_cast<double>(g.n));
  }
  out.error_bound = out.lipschitz * out.step * std::sqrt(static_cast<double>(d));
  return out;
}

void DiscreteDistribution::validate() const {
  if (domain < 1) throw ValidationError("distribution domain must be nonempty");
  if (x.empty() || static_cast<Index>(x.size()) != y.size() || y.size() != prob.size()) {
    throw ValidationError("distribution atoms need matching x, y and prob entries");
  }
  for (int xi : x) {
    if (xi < 0 || xi >= domain) throw ValidationError("distribution atom outside the domain");
  }
  if ((prob.array() < 0.0).any() || std::abs(prob.sum() - 1.0) > 1e-9) {
    throw ValidationError("distribution probabilities must be nonnegative and sum to 1");
  }
}

Eigen::VectorXd DiscreteDistribution::marginal() const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(domain);
  for (std::size_t i = 0; i < x.size(); ++i) p(x[i]) += prob(static_cast<Index>(i));
  return p;
}

Eigen::VectorXd DiscreteDistribution::conditional_mean() const {
  const Eigen::VectorXd p = marginal();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(domain);
  for (std::size_t i = 0; i < x.size(); ++i) {
    m(x[i]) += prob(static_cast<Index>(i)) * y(static_cast<Index>(i));
  }
  for (Index k = 0; k < domain; ++k) m(k) = p(k) > 0.0 ? m(k) / p(k) : 0.0;
  return m;
}

double DiscreteDistribution::sq_norm(const Eigen::VectorXd& g) const {
  return marginal().dot(g.array().square().matrix());
}

double enumerate_adversarial_value(const DiscreteDistribution& dist, const Eigen::VectorXd& h,
                                   const std::vector<Eigen::VectorXd>& test_functions,
                                   double c) {
  dist.validate();
  if (test_functions.empty()) throw ValidationError("test class must be nonempty");
  if (h.size() != dist.domain) throw ValidationError("h must have one value per domain point");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& f : test_functions) {
    if (f.size() != dist.domain) throw ValidationError("test function has the wrong length");
    double v = 0.0;
    for (std::size_t i = 0; i < dist.x.size(); ++i) {
      const int k = dist.x[i];
      const auto ii = static_cast<Index>(i);
      v += dist.prob(ii) * (2.0 * (dist.y(ii) - h(k)) * f(k) - c * f(k) * f(k));
    }
    best = std::max(best, v);
  }
  return best;
}

double completing_square_rhs(const DiscreteDistribution& dist, const Eigen::VectorXd& h,
                             const std::vector<Eigen::VectorXd>& test_functions, double c) {
  dist.validate();
  if (!(c > 0.0)) throw ValidationError("completing-square check requires c > 0");
  if (test_functions.empty()) throw ValidationError("test class must be nonempty");
  const Eigen::VectorXd resid = dist.conditional_mean() - h;
  double closest = std::numeric_limits<double>::infinity();
  for (const auto& f : test_functions) closest = std::min(closest, dist.sq_norm(resid - c * f));
  return (dist.sq_norm(resid) - closest) / c;
}

}  // namespace robust_moments
