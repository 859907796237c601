#include <doctest.h>

#include <fstream>

#include "robust_moments/bench.hpp"
#include "robust_moments/common.hpp"
#include "support.hpp"

using namespace robust_moments;

namespace {

BenchPlan small_plan() {
  BenchPlan plan;
  plan.group_counts = {2};
  plan.group_size = 20;
  plan.repetitions = 1;
  plan.methods = {Method::kAdvMoment};
  plan.experiment.nystrom_m = 10;
  plan.experiment.nystrom_r = 10;
  plan.experiment.coefficients.lambda = 1e-3;
  plan.experiment.solver.iterations = 50;
  plan.warmup = false;
  return plan;
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("one cell, one method, one repetition gives one record") {
  set_warning_handler([](std::string_view) {});
  const auto records = run_bench(small_plan());
  set_warning_handler(nullptr);
  REQUIRE(records.size() == 1);
  CHECK(records[0].group_count == 2);
  CHECK(records[0].method == Method::kAdvMoment);
  const PhaseTimings& t = records[0].timings;
  CHECK(t.total_seconds >= t.build_seconds + t.erm_seconds + t.game_seconds - 1e-3);
}

TEST_CASE("methods in a cell share the dataset") {
  set_warning_handler([](std::string_view) {});
  BenchPlan plan = small_plan();
  plan.group_counts = {2, 4};
  plan.repetitions = 2;
  plan.methods = {Method::kAdvMoment, Method::kDro, Method::kMro};
  plan.warmup = true;
  int progress = 0;
  const auto records = run_bench(plan, [&progress](const BenchRecord&) { ++progress; });
  REQUIRE(records.size() == 12);
  CHECK(progress == 12);
  for (const auto& a : records) {
    for (const auto& b : records) {
      const bool same_cell = a.group_count == b.group_count && a.repetition == b.repetition;
      CHECK((a.dataset_hash == b.dataset_hash) == same_cell);
    }
    if (a.method == Method::kMro) CHECK(a.timings.total_seconds >= a.timings.erm_seconds);
  }
  const auto cells = aggregate(records);
  CHECK(cells.size() == 6);
  for (const auto& c : cells) CHECK(c.repetitions == 2);

  const auto again = run_bench(plan);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(again[i].worst_group_regret == records[i].worst_group_regret);
  }
  set_warning_handler(nullptr);
}

TEST_CASE("bench seeds are a pure function of the cell") {
  CHECK(bench_seed(5, 10, 1) == bench_seed(5, 10, 1));
  CHECK(bench_seed(5, 10, 1) != bench_seed(5, 10, 2));
  CHECK(bench_seed(5, 10, 1) != bench_seed(5, 12, 1));
  CHECK(bench_seed(5, 10, 1) != bench_seed(6, 10, 1));
}

TEST_CASE("mean and standard error") {
  const MeanSe three = mean_se({1.0, 2.0, 3.0});
  CHECK(three.mean == doctest::Approx(2.0));
  CHECK(three.se == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(mean_se({4.2}).se == 0.0);
  CHECK(mean_se({0.5, 0.5, 0.5, 0.5}).se == 0.0);
}

TEST_CASE("plan validation") {
  BenchPlan plan = small_plan();
  plan.group_counts = {3};
  CHECK_THROWS(plan.validate());
  plan.group_counts = {};
  CHECK_THROWS(plan.validate());
  plan = small_plan();
  plan.repetitions = 0;
  CHECK_THROWS(plan.validate());
}

TEST_CASE("csv writers") {
  BenchRecord r;
  r.method = Method::kMro;
  r.group_count = 4;
  r.repetition = 1;
  r.timings = {0.1, 0.2, 0.3, 0.6};
  const std::vector<BenchRecord> records{r};
  const auto dir = test_support::scratch_dir("bench_csv");
  write_bench_raw(records, dir / "raw.csv");
  write_bench_records(records, dir / "records.csv");
  write_bench_aggregate(aggregate(records), dir / "agg.csv");
  CHECK(count_lines(dir / "raw.csv") == 5);
  CHECK(count_lines(dir / "records.csv") == 2);
  CHECK(count_lines(dir / "agg.csv") == 2);
  std::ifstream in(dir / "raw.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "method,group_count,rep,phase,seconds");
}

TEST_CASE("spearman correlation") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3, 4, 5}, {1, 4, 9, 16, 100}) == doctest::Approx(1.0));
  // Ties get average ranks: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
  CHECK(spearman({1, 2, 3, 4}, {1, 5, 5, 7}) == doctest::Approx(0.9486832980505138));
}
