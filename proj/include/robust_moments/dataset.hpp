#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace robust_moments {

using Eigen::Index;

struct Sample {
  Eigen::VectorXd x;
  double y = 0.0;
};

/// One group's samples: row i of `x` is the covariate of sample i.
struct Group {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  Index size() const { return y.size(); }
};

/// M nonempty groups sharing one covariate dimension. Immutable once built;
/// the constructor enforces every invariant (finite values, consistent
/// shapes, no empty group).
class GroupedDataset {
 public:
  explicit GroupedDataset(std::vector<Group> groups);

  static GroupedDataset from_samples(
      const std::vector<std::vector<Sample>>& groups);

  std::size_t num_groups() const { return groups_.size(); }
  Index covariate_dim() const { return groups_.front().x.cols(); }
  Index total_size() const { return offsets_.back(); }
  const Group& group(std::size_t j) const { return groups_.at(j); }
  const std::vector<Group>& groups() const { return groups_; }
  std::vector<Index> group_sizes() const;

  /// Row offset of group j in the pooled (concatenated) ordering.
  Index offset(std::size_t j) const { return offsets_.at(j); }

  Eigen::MatrixXd pooled_covariates() const;
  Eigen::VectorXd pooled_labels() const;

  bool operator==(const GroupedDataset& other) const;

 private:
  std::vector<Group> groups_;
  std::vector<Index> offsets_;
};

/// Two-parabola benchmark: 2k groups. Groups 0..k-1 have E[y|x] = x^2 and a
/// noise variance drawn from the high range; groups k..2k-1 have
/// E[y|x] = x^2 + 1 and a variance drawn from the low range. Within each half
/// the k groups evenly partition [-1, 1].
struct SyntheticSpec {
  int k = 1;
  int group_size = 100;
  double high_noise_lo = 1.0;
  double high_noise_hi = 2.0;
  double low_noise_lo = 0.0;
  double low_noise_hi = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  int k = 1;
  std::vector<double> noise_var;

  std::size_t num_groups() const { return noise_var.size(); }
  /// 0 for the x^2 half, 1 for the x^2 + 1 half.
  double offset(std::size_t group) const;
  double h0(std::size_t group, double x) const { return x * x + offset(group); }
  /// [lo, hi] covariate interval of the group.
  std::pair<double, double> x_range(std::size_t group) const;
};

/// Draw order (part of the reproducibility contract): for each group in
/// index order, one uniform variance draw, then for each sample a uniform x
/// followed by a standard normal for the noise.
std::pair<GroupedDataset, GroundTruth> generate_synthetic(
    const SyntheticSpec& spec);

/// Column layout of a delimited dataset file. An empty `covariates` list
/// means "every column whose name is not the label or group column", in
/// file order.
struct CsvSchema {
  std::vector<std::string> covariates;
  std::string label = "y";
  std::string group = "group";
};

/// Reads comma-delimited text with a header row. Groups are assembled in
/// ascending group-id order; row order within a group is preserved.
/// Throws ParseError (with line number) on any malformed input.
GroupedDataset load_dataset(const std::filesystem::path& path,
                            const CsvSchema& schema = {});

/// Writes `x0,...,x{p-1},y,group` with 17 significant digits; group ids are
/// the 0-based group indices.
void save_dataset(const GroupedDataset& ds, const std::filesystem::path& path);

/// FNV-1a over the raw bytes of all covariates, labels and group sizes.
std::uint64_t dataset_hash(const GroupedDataset& ds);

}  // namespace robust_moments
