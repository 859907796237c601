// End-to-end acceptance run: one PASS/FAIL line per criterion, exit code 1 if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "robust_moments/bench.hpp"
#include "robust_moments/common.hpp"
#include "robust_moments/evaluation.hpp"
#include "robust_moments/oracle_game.hpp"
#include "robust_moments/pipeline.hpp"
#include "robust_moments/property_checks.hpp"
#include "robust_moments/rng.hpp"

using namespace robust_moments;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

// Shared experiment settings for the two-parabola runs.
ExperimentConfig parabola_config(Method m) {
  ExperimentConfig cfg;
  cfg.method = m;
  cfg.features = FeatureChoice::kNystrom;
  cfg.kernel.gamma = 1.0;
  cfg.nystrom_m = 100;
  cfg.nystrom_r = 100;
  cfg.coefficients.lambda = 1e-3;
  cfg.coefficients.mu = 1e-6;
  cfg.solver.iterations = 5000;
  cfg.seed = derive_seed(0, 1, 0);
  return cfg;
}

Outcome fit_curves() {
  SyntheticSpec spec;
  spec.k = 25;
  spec.group_size = 100;
  spec.seed = 0;
  const GroupedDataset ds = generate_synthetic(spec).first;
  std::map<Method, std::vector<std::pair<double, double>>> curves;
  for (Method m : {Method::kAdvMoment, Method::kMro, Method::kDro}) {
    curves[m] = fit_curve(fit_method(ds, parabola_config(m)).predictor());
  }
  auto deviation = [&](Method m) {
    double s = 0.0;
    for (const auto& [x, h] : curves[m]) s += std::abs(h - (x * x + 0.5));
    return s / static_cast<double>(curves[m].size());
  };
  double below = 0.0;
  for (std::size_t i = 0; i < curves[Method::kDro].size(); ++i) {
    below += curves[Method::kDro][i].second - curves[Method::kAdvMoment][i].second;
  }
  below /= static_cast<double>(curves[Method::kDro].size());
  const double adv = deviation(Method::kAdvMoment), mro = deviation(Method::kMro);
  return {adv <= 0.25 && mro <= 0.25 && below <= -0.1,
          fmt("mean |h - (x^2+0.5)|: adv %.4f, mro %.4f (<= 0.25); mean dro - adv %.4f (<= -0.1)",
              adv, mro, below)};
}

Outcome scaling_trend() {
  BenchPlan plan;
  plan.group_counts = {2, 10, 18, 26, 34, 42, 50};
  plan.group_size = 100;
  plan.repetitions = 3;
  plan.methods = {Method::kAdvMoment, Method::kMro};
  plan.experiment = parabola_config(Method::kAdvMoment);
  const auto cells = aggregate(run_bench(plan));
  std::map<int, double> adv, mro;
  for (const auto& c : cells) {
    (c.method == Method::kMro ? mro : adv)[c.group_count] = c.total.mean;
  }
  std::vector<double> counts, ratios;
  std::string list;
  for (const auto& [g, t] : adv) {
    counts.push_back(g);
    ratios.push_back(mro.at(g) / t);
    list += fmt(" %.0f:%.2f", g, ratios.back());
  }
  const double rho = spearman(counts, ratios);
  return {rho >= 0.8, fmt("spearman(group count, mro/adv time) = %.3f (>= 0.8); ratios", rho) + list};
}

Outcome from_checks(const std::vector<CheckResult>& results) {
  Outcome o{true, ""};
  for (const auto& r : results) {
    o.passed = o.passed && r.passed;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += r.name + fmt(" %.3g (tol %.0e)", r.max_error, r.tolerance);
    if (!r.detail.empty() && r.name == "duality_gap_rate") o.detail += " " + r.detail;
  }
  return o;
}

GameCoefficients random_game(Rng& rng, int groups, int n, int d, const CoefficientOptions& opts,
                             std::vector<Eigen::MatrixXd>* phi_out = nullptr,
                             std::vector<Eigen::VectorXd>* y_out = nullptr) {
  std::vector<Eigen::MatrixXd> phi;
  std::vector<Eigen::VectorXd> y;
  for (int j = 0; j < groups; ++j) {
    Eigen::MatrixXd x(n, d);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.normal();
    phi.push_back(x);
    y.push_back(v);
  }
  if (phi_out) *phi_out = phi;
  if (y_out) *y_out = y;
  return build_linear_coefficients(phi, y, opts);
}

Outcome brute_force() {
  Rng rng(606);
  Outcome o{true, ""};
  double worst_slack = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    CoefficientOptions opts;
    opts.lambda = 0.1;
    opts.norm_bound = 1.0;
    const GameCoefficients gc = random_game(rng, 3, 10, 2, opts);
    SolverConfig cfg;
    cfg.iterations = 4000;
    const SolverResult r = solve(gc, cfg);
    const BruteForceResult bf = brute_force_minmax(gc, 400, 1.0);
    const double diff = std::abs(r.upper - bf.value);
    const double tol = r.gap + bf.error_bound;
    o.passed = o.passed && diff <= tol;
    worst_slack = std::max(worst_slack, diff / tol);
  }
  o.detail = fmt("max |solver - grid| / (gap + L*step*sqrt(d)) = %.3f over 5 instances (<= 1)",
                 worst_slack);
  return o;
}

Outcome mro_agreement() {
  Outcome o{true, ""};
  double worst = 0.0;
  for (std::uint64_t seed : {71, 72, 73}) {
    // Each group is linear in x, so the regression function lies in the
    // feature class (x, 1).
    Rng rng(seed);
    std::vector<Group> groups;
    for (int j = 0; j < 4; ++j) {
      const double slope = rng.uniform(-2.0, 2.0), icpt = rng.uniform(-1.0, 1.0);
      const double sd = rng.uniform(0.05, 1.0);
      Group g{Eigen::MatrixXd(40, 1), Eigen::VectorXd(40)};
      for (Index i = 0; i < 40; ++i) {
        g.x(i, 0) = rng.uniform(-1.0, 1.0);
        g.y(i) = slope * g.x(i, 0) + icpt + sd * rng.normal();
      }
      groups.push_back(std::move(g));
    }
    const GroupedDataset ds(groups);
    ExperimentConfig cfg;
    cfg.features = FeatureChoice::kLinear;
    cfg.coefficients.lambda = 0.0;
    cfg.coefficients.mu = 0.0;
    cfg.solver.iterations = 5000;
    double regret[2], gap[2];
    int k = 0;
    for (Method m : {Method::kAdvMoment, Method::kMro}) {
      cfg.method = m;
      const FittedModel model = fit_method(ds, cfg);
      const Eigen::VectorXd loss = group_square_losses(model.predictor(), ds);
      regret[k] = (loss - erm_losses(ds, model)).maxCoeff();
      gap[k] = model.gap;
      ++k;
    }
    const double diff = std::abs(regret[0] - regret[1]);
    const double tol = gap[0] + gap[1] + 1e-3;
    o.passed = o.passed && diff <= tol;
    worst = std::max(worst, diff / tol);
  }
  o.detail = fmt("max |regret_adv - regret_mro| / (gap_adv + gap_mro + 1e-3) = %.3f over 3 "
                 "instances (<= 1)",
                 worst);
  return o;
}

Outcome oracle_cross_check() {
  Outcome o{true, ""};
  std::string parts;
  for (int m : {1, 3}) {
    Rng rng(900 + static_cast<std::uint64_t>(m));
    std::vector<Eigen::MatrixXd> phi;
    std::vector<Eigen::VectorXd> y;
    CoefficientOptions opts;
    opts.norm_bound = 1.0;
    const GameCoefficients gc = random_game(rng, m, 8, 2, opts, &phi, &y);
    std::vector<Group> groups;
    for (int j = 0; j < m; ++j) groups.push_back({phi[j], y[j]});
    const GroupedDataset ds(groups);
    SolverConfig cfg;
    cfg.iterations = 10000;
    const SolverResult mg = solve(gc, cfg);
    const OracleSolverResult og = oracle_solve(ds, linear_ball_oracles(phi, 1.0), cfg);
    bool counts = og.linear_opt_calls == cfg.iterations &&
                  og.regression_calls == static_cast<long>(cfg.iterations) * m;
    for (const auto& rec : og.trace) {
      counts = counts && rec.linear_opt_calls == 1 && rec.regression_calls == m;
    }
    const double diff = std::abs(og.upper - mg.upper);
    const double tol = og.gap + mg.gap + 1e-3;
    o.passed = o.passed && counts && diff <= tol;
    if (!parts.empty()) parts += "; ";
    parts += fmt("M=%.0f: |oracle - moment| %.2e (tol %.2e)", m, diff, tol) +
             (counts ? ", calls 1+M per iteration" : ", call counts WRONG");
  }
  o.detail = parts;
  return o;
}

}  // namespace

int main() {
  set_warning_handler([](std::string_view) {});
  CheckOptions opts;
  using Fn = std::function<Outcome()>;
  const std::vector<std::pair<std::string, Fn>> criteria{
      {"fit curves on two-parabola data", fit_curves},
      {"runtime ratio grows with groups", scaling_trend},
      {"duality gap rate", [&] { return from_checks({check_duality_gap_rate(opts)}); }},
      {"completing the square", [&] { return from_checks({check_completing_square(opts)}); }},
      {"sandwich bounds",
       [&] {
         return from_checks({check_sandwich_upper(opts), check_sandwich_lower(opts),
                             check_realizable_equivalence(opts)});
       }},
      {"brute-force equivalence", brute_force},
      {"mro / adv-moment agreement", mro_agreement},
      {"nystrom exactness", [&] { return from_checks({check_nystrom_exactness(opts)}); }},
      {"oracle game cross-check", oracle_cross_check},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.passed) ++failed;
    std::printf("%s  criterion %zu  %s: %s  [%.1fs]\n", o.passed ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
