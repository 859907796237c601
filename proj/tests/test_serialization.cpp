#include <doctest.h>

#include "robust_moments/common.hpp"
#include "robust_moments/pipeline.hpp"
#include "robust_moments/serialization.hpp"
#include "support.hpp"

using namespace robust_moments;

namespace {

GroupedDataset small_data() {
  SyntheticSpec spec;
  spec.k = 1;
  spec.group_size = 15;
  spec.seed = 4;
  return generate_synthetic(spec).first;
}

void check_same_predictions(const FittedModel& a, const FittedModel& b) {
  const Predictor ha = a.predictor(), hb = b.predictor();
  for (double x : {-0.9, -0.2, 0.0, 0.4, 1.0}) {
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, x);
    CHECK(ha(v) == hb(v));
  }
}

}  // namespace

TEST_CASE("models round-trip exactly") {
  set_warning_handler([](std::string_view) {});
  const GroupedDataset ds = small_data();
  for (FeatureChoice f : {FeatureChoice::kLinear, FeatureChoice::kNystrom, FeatureChoice::kRkhs}) {
    CAPTURE(feature_choice_name(f));
    ExperimentConfig cfg;
    cfg.features = f;
    cfg.nystrom_m = 10;
    cfg.nystrom_r = 8;
    cfg.coefficients.lambda = 0.01;
    cfg.solver.iterations = 30;
    const FittedModel model = fit_method(ds, cfg);
    const FittedModel back = model_from_json(nlohmann::json::parse(model_to_json(model).dump()));
    CHECK(back.method == model.method);
    CHECK(back.features == model.features);
    CHECK(back.alpha == model.alpha);
    CHECK(back.w_bar == model.w_bar);
    CHECK(back.gap == model.gap);
    if (f != FeatureChoice::kRkhs) CHECK(back.feature_map == model.feature_map);
    if (f == FeatureChoice::kRkhs) CHECK(back.centers == model.centers);
    check_same_predictions(model, back);
  }
  set_warning_handler(nullptr);
}

TEST_CASE("model files") {
  ExperimentConfig cfg;
  cfg.method = Method::kDro;
  cfg.features = FeatureChoice::kLinear;
  cfg.solver.iterations = 20;
  const FittedModel model = fit_method(small_data(), cfg);
  const auto dir = test_support::scratch_dir("serialization");
  save_model(model, dir / "m.json");
  const FittedModel back = load_model(dir / "m.json");
  CHECK(back.alpha == model.alpha);
  CHECK(back.method == Method::kDro);
  CHECK_THROWS(load_model(dir / "missing.json"));
}

TEST_CASE("malformed documents are rejected") {
  CHECK_THROWS_AS(model_from_json(nlohmann::json::object()), ValidationError);
  nlohmann::json j = {{"format", "something-else"}};
  CHECK_THROWS_AS(model_from_json(j), ValidationError);
  CHECK_THROWS_AS(matrix_from_json(nlohmann::json::parse("[[1, 2], [3]]")), ValidationError);
  CHECK_THROWS_AS(vector_from_json(nlohmann::json::parse("[1, \"a\"]")), ValidationError);
}

TEST_CASE("matrix and vector json helpers") {
  Eigen::MatrixXd m(2, 3);
  m << 0.1, 1e-300, -3.5, 1.0 / 3.0, 2.0, 7.0;
  CHECK(matrix_from_json(matrix_to_json(m)) == m);
  const Eigen::Vector3d v(0.1, 0.2, 0.3);
  CHECK(vector_from_json(vector_to_json(v)) == v);
}
