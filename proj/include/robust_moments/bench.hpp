#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "robust_moments/pipeline.hpp"

namespace robust_moments {

struct BenchPlan {
  std::vector<int> group_counts{2, 10, 18, 26, 34, 42, 50};
  int group_size = 100;
  int repetitions = 3;
  std::vector<Method> methods{Method::kAdvMoment, Method::kDro, Method::kMro};
  std::uint64_t seed_base = 0;
  /// Method, features and solver settings shared by every cell; `method` is
  /// overridden per run.
  ExperimentConfig experiment;
  bool warmup = true;

  void validate() const;
};

struct BenchRecord {
  Method method = Method::kAdvMoment;
  int group_count = 0;
  int repetition = 0;
  std::uint64_t dataset_hash = 0;
  PhaseTimings timings;
  double worst_group_regret = 0.0;
  double gap = 0.0;
};

/// Seed of the dataset for one (group count, repetition) cell.
std::uint64_t bench_seed(std::uint64_t base, int group_count, int repetition);

/// Cells run sequentially on one thread. Each cell gets a fresh synthetic
/// dataset and every method runs on that same dataset. One untimed warm-up
/// run per method on the smallest cell precedes the timed runs. `progress`,
/// if set, is called after each record.
std::vector<BenchRecord> run_bench(
    const BenchPlan& plan,
    const std::function<void(const BenchRecord&)>& progress = {});

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sd / sqrt(R), sample sd; 0 when R = 1
};
MeanSe mean_se(const std::vector<double>& values);

struct BenchCell {
  Method method = Method::kAdvMoment;
  int group_count = 0;
  int repetitions = 0;
  MeanSe build, erm, game, total, worst_group_regret;
};

/// One row per (method, group count), in first-seen order.
std::vector<BenchCell> aggregate(const std::vector<BenchRecord>& records);

/// Long format: method,group_count,rep,phase,seconds (phases build, erm,
/// game, total).
void write_bench_raw(const std::vector<BenchRecord>& records, const std::filesystem::path& path);
/// One row per record, with hash and worst-group regret.
void write_bench_records(const std::vector<BenchRecord>& records,
                         const std::filesystem::path& path);
void write_bench_aggregate(const std::vector<BenchCell>& cells, const std::filesystem::path& path);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace robust_moments
