#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "robust_moments/common.hpp"
#include "robust_moments/dataset.hpp"
#include "robust_moments/evaluation.hpp"
#include "robust_moments/moment_game.hpp"
#include "robust_moments/pipeline.hpp"
#include "robust_moments/property_checks.hpp"
#include "robust_moments/rng.hpp"
#include "robust_moments/serialization.hpp"

namespace py = pybind11;
using namespace robust_moments;

namespace {

ExperimentConfig make_config(const std::string& method, const std::string& features,
                             double gamma, Index nystrom_m, Index nystrom_r, bool intercept,
                             double lambda, double mu, std::optional<double> norm_bound,
                             double a_n, int iters, std::optional<double> eta,
                             double payoff_clip, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.method = parse_method(method);
  cfg.features = parse_feature_choice(features);
  cfg.kernel.gamma = gamma;
  cfg.nystrom_m = nystrom_m;
  cfg.nystrom_r = nystrom_r;
  cfg.linear_intercept = intercept;
  cfg.coefficients.lambda = lambda;
  cfg.coefficients.mu = mu;
  if (norm_bound) cfg.coefficients.norm_bound = *norm_bound;
  cfg.coefficients.a_n = a_n;
  cfg.solver.iterations = iters;
  cfg.solver.eta = eta;
  cfg.solver.payoff_clip = payoff_clip;
  cfg.seed = derive_seed(seed, 1, 0);
  return cfg;
}

py::dict report_to_dict(const EvalReport& r) {
  py::dict d;
  d["square_loss"] = r.square_loss;
  d["regret"] = r.regret;
  d["multiaccuracy"] = r.multiaccuracy;
  d["worst_square_loss"] = py::make_tuple(r.worst_square_loss.group, r.worst_square_loss.value);
  d["worst_regret"] = py::make_tuple(r.worst_regret.group, r.worst_regret.value);
  d["worst_multiaccuracy"] =
      py::make_tuple(r.worst_multiaccuracy.group, r.worst_multiaccuracy.value);
  if (r.mse_to_h0) {
    d["mse_to_h0"] = *r.mse_to_h0;
    d["worst_mse_to_h0"] = py::make_tuple(r.worst_mse_to_h0->group, r.worst_mse_to_h0->value);
  }
  if (r.gap) d["gap"] = *r.gap;
  d["fit_curve"] = r.fit_curve;
  return d;
}

py::dict timings_to_dict(const PhaseTimings& t) {
  py::dict d;
  d["build"] = t.build_seconds;
  d["erm"] = t.erm_seconds;
  d["game"] = t.game_seconds;
  d["total"] = t.total_seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Distributionally robust regression: adversarial-moment game, group DRO and MRO.";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<GroupedDataset>(m, "GroupedDataset")
      .def(py::init([](const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>& groups) {
             std::vector<Group> gs;
             for (const auto& [x, y] : groups) gs.push_back({x, y});
             return GroupedDataset(std::move(gs));
           }),
           py::arg("groups"), "Build from a list of (x, y) pairs, one per group.")
      .def_property_readonly("num_groups", &GroupedDataset::num_groups)
      .def_property_readonly("covariate_dim", &GroupedDataset::covariate_dim)
      .def_property_readonly("total_size", &GroupedDataset::total_size)
      .def_property_readonly("group_sizes", &GroupedDataset::group_sizes)
      .def("group", [](const GroupedDataset& ds, std::size_t j) {
        return py::make_tuple(ds.group(j).x, ds.group(j).y);
      })
      .def("hash", &dataset_hash)
      .def("__len__", &GroupedDataset::num_groups)
      .def("__eq__", &GroupedDataset::operator==);

  py::class_<GroundTruth>(m, "GroundTruth")
      .def_readonly("k", &GroundTruth::k)
      .def_readonly("noise_var", &GroundTruth::noise_var)
      .def("h0", &GroundTruth::h0, py::arg("group"), py::arg("x"))
      .def("x_range", &GroundTruth::x_range, py::arg("group"));

  m.def(
      "generate_synthetic",
      [](int k, int group_size, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.k = k;
        spec.group_size = group_size;
        spec.seed = seed;
        return generate_synthetic(spec);
      },
      py::arg("k") = 1, py::arg("group_size") = 100, py::arg("seed") = 0,
      "Two-parabola data with 2k groups; returns (dataset, ground_truth).");
  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); },
        py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));

  py::class_<FittedModel>(m, "FittedModel")
      .def_property_readonly("method",
                             [](const FittedModel& f) { return std::string(method_name(f.method)); })
      .def_property_readonly("features", [](const FittedModel& f) {
        return std::string(feature_choice_name(f.features));
      })
      .def_readonly("alpha", &FittedModel::alpha)
      .def_readonly("w_bar", &FittedModel::w_bar)
      .def_readonly("upper", &FittedModel::upper)
      .def_readonly("lower", &FittedModel::lower)
      .def_readonly("gap", &FittedModel::gap)
      .def_property_readonly("gap_trace",
                             [](const FittedModel& f) {
                               Eigen::VectorXd out(static_cast<Index>(f.trace.size()));
                               for (std::size_t t = 0; t < f.trace.size(); ++t) {
                                 out(static_cast<Index>(t)) = f.trace[t].gap_bound;
                               }
                               return out;
                             })
      .def_property_readonly("timings", [](const FittedModel& f) { return timings_to_dict(f.timings); })
      .def(
          "predict",
          [](const FittedModel& f, const Eigen::MatrixXd& x) {
            return predict_rows(f.predictor(), x);
          },
          py::arg("x"), "Predictions for each row of x.")
      .def("save", [](const FittedModel& f, const std::filesystem::path& p) { save_model(f, p); })
      .def("to_json", [](const FittedModel& f) { return model_to_json(f).dump(); });

  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); },
        py::arg("path"));

  m.def(
      "fit",
      [](const GroupedDataset& ds, const std::string& method, const std::string& features,
         double gamma, Index nystrom_m, Index nystrom_r, bool intercept, double lambda,
         double mu, std::optional<double> norm_bound, double a_n, int iters,
         std::optional<double> eta, double payoff_clip, std::uint64_t seed) {
        const ExperimentConfig cfg = make_config(method, features, gamma, nystrom_m, nystrom_r,
                                                 intercept, lambda, mu, norm_bound, a_n, iters,
                                                 eta, payoff_clip, seed);
        py::gil_scoped_release release;
        return fit_method(ds, cfg);
      },
      py::arg("dataset"), py::arg("method") = "adv-moment", py::arg("features") = "nystrom",
      py::arg("gamma") = 1.0, py::arg("nystrom_m") = 100, py::arg("nystrom_r") = 100,
      py::arg("intercept") = true, py::arg("lam") = 1e-3, py::arg("mu") = 1e-6,
      py::arg("norm_bound") = py::none(), py::arg("a_n") = 1.0, py::arg("iters") = 5000,
      py::arg("eta") = py::none(), py::arg("payoff_clip") = 1.0, py::arg("seed") = 0,
      "Fit one method (adv-moment, dro, mro, oracle) on a grouped dataset.");

  m.def(
      "evaluate",
      [](const FittedModel& model, const GroupedDataset& ds, const GroundTruth* gt,
         double ma_bound) {
        const TestFunctionBall ball{evaluation_features(model), ma_bound};
        return report_to_dict(
            evaluate(model.predictor(), ds, erm_losses(ds, model), ball, gt, model.gap));
      },
      py::arg("model"), py::arg("dataset"), py::arg("ground_truth") = nullptr,
      py::arg("ma_bound") = 1.0,
      "Per-group square loss, regret, multiaccuracy error (and distance to h0 with ground truth).");

  m.def(
      "solve_linear_game",
      [](const std::vector<Eigen::MatrixXd>& features, const std::vector<Eigen::VectorXd>& labels,
         double lambda, double mu, std::optional<double> norm_bound, int iters) {
        CoefficientOptions opts;
        opts.lambda = lambda;
        opts.mu = mu;
        if (norm_bound) opts.norm_bound = *norm_bound;
        SolverConfig cfg;
        cfg.iterations = iters;
        const SolverResult r = solve(build_linear_coefficients(features, labels, opts), cfg);
        py::dict d;
        d["alpha"] = r.alpha_bar;
        d["w"] = r.w_bar;
        d["upper"] = r.upper;
        d["lower"] = r.lower;
        d["gap"] = r.gap;
        return d;
      },
      py::arg("features"), py::arg("labels"), py::arg("lam") = 0.0, py::arg("mu") = 0.0,
      py::arg("norm_bound") = py::none(), py::arg("iters") = 1000,
      "Adversarial-moment game on explicit per-group feature matrices.");

  m.def(
      "run_checks",
      [](std::uint64_t seed, bool inject_fault) {
        CheckOptions opts;
        opts.seed = seed;
        opts.inject_fault = inject_fault;
        py::list out;
        for (const auto& r : run_all_checks(opts)) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["max_error"] = r.max_error;
          d["tolerance"] = r.tolerance;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = CheckOptions{}.seed, py::arg("inject_fault") = false,
      "Numerical property checks; one dict per check.");

  m.def("set_num_threads", &set_num_threads, py::arg("threads"));
}
