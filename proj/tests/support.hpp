#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "robust_moments/rng.hpp"

namespace test_support {

inline Eigen::MatrixXd random_matrix(robust_moments::Rng& rng, Eigen::Index rows,
                                     Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline Eigen::VectorXd random_vector(robust_moments::Rng& rng, Eigen::Index n) {
  return random_matrix(rng, n, 1).col(0);
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("robust_moments_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test_support
