#include "robust_moments/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "robust_moments/common.hpp"
#include "robust_moments/rng.hpp"

namespace robust_moments {

GroupedDataset::GroupedDataset(std::vector<Group> groups)
    : groups_(std::move(groups)) {
  if (groups_.empty()) throw ValidationError("dataset needs at least one group");
  const Index p = groups_.front().x.cols();
  if (p < 1) throw ValidationError("covariate dimension must be >= 1");
  offsets_.reserve(groups_.size() + 1);
  offsets_.push_back(0);
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    const Group& g = groups_[j];
    const std::string where = "group " + std::to_string(j);
    if (g.y.size() == 0) throw ValidationError(where + " is empty");
    if (g.x.rows() != g.y.size()) {
      throw ValidationError(where + ": covariate rows do not match labels");
    }
    if (g.x.cols() != p) {
      throw ValidationError(where + ": covariate dimension mismatch");
    }
    if (!g.x.allFinite() || !g.y.allFinite()) {
      throw ValidationError(where + " contains non-finite values");
    }
    offsets_.push_back(offsets_.back() + g.size());
  }
}

GroupedDataset GroupedDataset::from_samples(
    const std::vector<std::vector<Sample>>& groups) {
  std::vector<Group> out;
  out.reserve(groups.size());
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const auto& samples = groups[j];
    if (samples.empty()) {
      throw ValidationError("group " + std::to_string(j) + " is empty");
    }
    const Index p = samples.front().x.size();
    Group g{Eigen::MatrixXd(static_cast<Index>(samples.size()), p),
            Eigen::VectorXd(static_cast<Index>(samples.size()))};
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].x.size() != p) {
        throw ValidationError("group " + std::to_string(j) +
                              ": covariate dimension mismatch");
      }
      g.x.row(static_cast<Index>(i)) = samples[i].x.transpose();
      g.y(static_cast<Index>(i)) = samples[i].y;
    }
    out.push_back(std::move(g));
  }
  return GroupedDataset(std::move(out));
}

std::vector<Index> GroupedDataset::group_sizes() const {
  std::vector<Index> sizes;
  sizes.reserve(groups_.size());
  for (const auto& g : groups_) sizes.push_back(g.size());
  return sizes;
}

Eigen::MatrixXd GroupedDataset::pooled_covariates() const {
  Eigen::MatrixXd out(total_size(), covariate_dim());
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    out.middleRows(offsets_[j], groups_[j].size()) = groups_[j].x;
  }
  return out;
}

Eigen::VectorXd GroupedDataset::pooled_labels() const {
  Eigen::VectorXd out(total_size());
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    out.segment(offsets_[j], groups_[j].size()) = groups_[j].y;
  }
  return out;
}

bool GroupedDataset::operator==(const GroupedDataset& other) const {
  if (groups_.size() != other.groups_.size()) return false;
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    const auto& a = groups_[j];
    const auto& b = other.groups_[j];
    if (a.x.rows() != b.x.rows() || a.x.cols() != b.x.cols()) return false;
    if (a.x != b.x || a.y != b.y) return false;
  }
  return true;
}

void SyntheticSpec::validate() const {
  if (k < 1) throw ValidationError("synthetic spec: k must be >= 1");
  if (group_size < 1) {
    throw ValidationError("synthetic spec: group_size must be >= 1");
  }
  auto check_range = [](double lo, double hi, const char* name) {
    if (!(lo >= 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
      throw ValidationError(std::string("synthetic spec: invalid ") + name +
                            " variance range");
    }
  };
  check_range(high_noise_lo, high_noise_hi, "high-noise");
  check_range(low_noise_lo, low_noise_hi, "low-noise");
}

double GroundTruth::offset(std::size_t group) const {
  if (group >= num_groups()) throw ValidationError("group index out of range");
  return group < static_cast<std::size_t>(k) ? 0.0 : 1.0;
}

std::pair<double, double> GroundTruth::x_range(std::size_t group) const {
  if (group >= num_groups()) throw ValidationError("group index out of range");
  const auto slot = static_cast<double>(group % static_cast<std::size_t>(k));
  const double width = 2.0 / k;
  const double lo = -1.0 + slot * width;
  const double hi = (slot + 1.0 == k) ? 1.0 : lo + width;
  return {lo, hi};
}

std::pair<GroupedDataset, GroundTruth> generate_synthetic(
    const SyntheticSpec& spec) {
  spec.validate();
  GroundTruth truth;
  truth.k = spec.k;
  const auto num_groups = static_cast<std::size_t>(2 * spec.k);
  truth.noise_var.resize(num_groups);

  Rng rng(spec.seed);
  std::vector<Group> groups;
  groups.reserve(num_groups);
  for (std::size_t j = 0; j < num_groups; ++j) {
    const bool high = j < static_cast<std::size_t>(spec.k);
    const double var = high ? rng.uniform(spec.high_noise_lo, spec.high_noise_hi)
                            : rng.uniform(spec.low_noise_lo, spec.low_noise_hi);
    truth.noise_var[j] = var;
    const auto [lo, hi] = truth.x_range(j);
    const double sd = std::sqrt(var);
    Group g{Eigen::MatrixXd(spec.group_size, 1),
            Eigen::VectorXd(spec.group_size)};
    for (Index i = 0; i < spec.group_size; ++i) {
      const double x = rng.uniform(lo, hi);
      g.x(i, 0) = x;
      g.y(i) = truth.h0(j, x) + sd * rng.normal();
    }
    groups.push_back(std::move(g));
  }
  return {GroupedDataset(std::move(groups)), std::move(truth)};
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view cell, std::size_t line,
                    const std::string& column) {
  cell = trim(cell);
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line) + ": column '" + column +
                         "' is not numeric: '" + std::string(cell) + "'",
                     line);
  }
  if (!std::isfinite(value)) {
    throw ParseError("line " + std::to_string(line) + ": column '" + column +
                         "' is not finite",
                     line);
  }
  return value;
}

}  // namespace

GroupedDataset load_dataset(const std::filesystem::path& path,
                            const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path.string(), 0);
  ++line_no;
  if (line.size() >= 3 && std::memcmp(line.data(), "\xEF\xBB\xBF", 3) == 0) {
    line.erase(0, 3);
  }
  std::vector<std::string> header;
  for (auto f : split_fields(line)) header.emplace_back(trim(f));

  auto find_column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ParseError("missing column '" + name + "' in header", 1);
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = find_column(schema.label);
  const std::size_t group_col = find_column(schema.group);
  std::vector<std::size_t> cov_cols;
  if (schema.covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != label_col && c != group_col) cov_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.covariates) cov_cols.push_back(find_column(name));
  }
  if (cov_cols.empty()) throw ParseError("no covariate columns", 1);

  std::map<long long, std::vector<Sample>> by_group;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Sample s;
    s.x.resize(static_cast<Index>(cov_cols.size()));
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      s.x(static_cast<Index>(c)) =
          parse_number(fields[cov_cols[c]], line_no, header[cov_cols[c]]);
    }
    s.y = parse_number(fields[label_col], line_no, header[label_col]);
    const double gid = parse_number(fields[group_col], line_no, header[group_col]);
    if (gid != std::floor(gid) || std::abs(gid) > 9.0e15) {
      throw ParseError("line " + std::to_string(line_no) +
                           ": group id is not an integer",
                       line_no);
    }
    by_group[static_cast<long long>(gid)].push_back(std::move(s));
  }
  if (by_group.empty()) throw ParseError("no data rows in " + path.string(), 0);

  std::vector<std::vector<Sample>> groups;
  groups.reserve(by_group.size());
  for (auto& [id, samples] : by_group) groups.push_back(std::move(samples));
  return GroupedDataset::from_samples(groups);
}

void save_dataset(const GroupedDataset& ds, const std::filesystem::path& path) {
  for (std::size_t j = 0; j < ds.num_groups(); ++j) {
    if (ds.group(j).size() == 0) {
      throw ValidationError("refusing to save: group " + std::to_string(j) +
                            " is empty");
    }
  }
  std::ostringstream out;
  const Index p = ds.covariate_dim();
  for (Index c = 0; c < p; ++c) out << 'x' << c << ',';
  out << "y,group\n";
  for (std::size_t j = 0; j < ds.num_groups(); ++j) {
    const Group& g = ds.group(j);
    for (Index i = 0; i < g.size(); ++i) {
      for (Index c = 0; c < p; ++c) out << format_double(g.x(i, c)) << ',';
      out << format_double(g.y(i)) << ',' << j << '\n';
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string text = out.str();
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw std::runtime_error("write failed: " + path.string());
}

std::uint64_t dataset_hash(const GroupedDataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& g : ds.groups()) {
    const std::int64_t n = g.size();
    feed(&n, sizeof n);
    feed(g.x.data(), sizeof(double) * static_cast<std::size_t>(g.x.size()));
    feed(g.y.data(), sizeof(double) * static_cast<std::size_t>(g.y.size()));
  }
  return h;
}

}  // namespace robust_moments
