#include "robust_moments/serialization.hpp"

#include <fstream>
#include <string>

#include "robust_moments/common.hpp"

namespace robust_moments {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("vector must be an array of numbers");
  std::vector<double> values;
  values.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError("vector entries must be numbers");
    values.push_back(v.get<double>());
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("matrix must be an array of rows");
  if (j.empty()) return {};
  const auto cols = static_cast<Index>(j.front().size());
  Eigen::MatrixXd m(static_cast<Index>(j.size()), cols);
  for (Index i = 0; i < m.rows(); ++i) {
    const Eigen::VectorXd row = vector_from_json(j[static_cast<std::size_t>(i)]);
    if (row.size() != cols) throw ValidationError("matrix rows have different lengths");
    m.row(i) = row.transpose();
  }
  return m;
}

nlohmann::json feature_map_to_json(const FeatureMap& fm) {
  if (fm.kind() == FeatureKind::kExplicitLinear) {
    return {{"kind", "linear"}, {"input_dim", fm.input_dim()}, {"intercept", fm.intercept()}};
  }
  return {{"kind", "nystrom"},
          {"gamma", fm.kernel().gamma},
          {"landmarks", matrix_to_json(fm.landmarks())},
          {"projection", matrix_to_json(fm.projection())},
          {"eigenvalues", vector_to_json(fm.eigenvalues())}};
}

FeatureMap feature_map_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear") {
      return FeatureMap::explicit_linear(j.at("input_dim").get<Index>(),
                                         j.at("intercept").get<bool>());
    }
    if (kind == "nystrom") {
      return FeatureMap::nystrom(matrix_from_json(j.at("landmarks")),
                                 KernelConfig{j.at("gamma").get<double>()},
                                 matrix_from_json(j.at("projection")),
                                 vector_from_json(j.at("eigenvalues")));
    }
    throw ValidationError("unknown feature map kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed feature map: ") + e.what());
  }
}

nlohmann::json model_to_json(const FittedModel& model) {
  nlohmann::json j;
  j["format"] = "robust_moments.model";
  j["version"] = std::string(kVersion);
  j["method"] = std::string(method_name(model.method));
  if (model.features == FeatureChoice::kRkhs) {
    j["features"] = {{"kind", "rkhs"},
                     {"gamma", model.kernel.gamma},
                     {"centers", matrix_to_json(model.centers)}};
  } else {
    j["features"] = feature_map_to_json(model.feature_map);
  }
  j["alpha"] = vector_to_json(model.alpha);
  j["w_bar"] = vector_to_json(model.w_bar);
  j["upper"] = model.upper;
  j["lower"] = model.lower;
  j["gap"] = model.gap;
  return j;
}

FittedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "robust_moments.model") {
      throw ValidationError("not a model file");
    }
    FittedModel model;
    model.method = parse_method(j.at("method").get<std::string>());
    const auto& f = j.at("features");
    if (f.at("kind").get<std::string>() == "rkhs") {
      model.features = FeatureChoice::kRkhs;
      model.kernel.gamma = f.at("gamma").get<double>();
      model.kernel.validate();
      model.centers = matrix_from_json(f.at("centers"));
    } else {
      model.feature_map = feature_map_from_json(f);
      model.features = model.feature_map.kind() == FeatureKind::kNystromRbf
                           ? FeatureChoice::kNystrom
                           : FeatureChoice::kLinear;
      model.kernel = model.feature_map.kernel();
    }
    model.alpha = vector_from_json(j.at("alpha"));
    model.w_bar = vector_from_json(j.at("w_bar"));
    model.upper = j.at("upper").get<double>();
    model.lower = j.at("lower").get<double>();
    model.gap = j.at("gap").get<double>();
    const Index expected = model.features == FeatureChoice::kRkhs ? model.centers.rows()
                                                                  : model.feature_map.dim();
    if (model.alpha.size() != expected) {
      throw ValidationError("model coefficients do not match the feature dimension");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace robust_moments
