#pragma once

#include <filesystem>
#include <json.hpp>

#include "robust_moments/pipeline.hpp"

namespace robust_moments {

/// Matrices are stored as arrays of rows; doubles use the shortest
/// representation that round-trips exactly.
nlohmann::json feature_map_to_json(const FeatureMap& fm);
FeatureMap feature_map_from_json(const nlohmann::json& j);

/// Coefficients, weights, gap and feature map of a fitted model. The trace is
/// not included.
nlohmann::json model_to_json(const FittedModel& model);
/// Throws ValidationError on malformed documents.
FittedModel model_from_json(const nlohmann::json& j);

void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace robust_moments
