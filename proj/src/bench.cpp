#include "robust_moments/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "robust_moments/common.hpp"
#include "robust_moments/rng.hpp"

namespace robust_moments {
namespace {

// Restores the thread count on scope exit.
class ThreadCountGuard {
 public:
  explicit ThreadCountGuard(int threads) : saved_(num_threads()) { set_num_threads(threads); }
  ~ThreadCountGuard() { set_num_threads(saved_); }
  ThreadCountGuard(const ThreadCountGuard&) = delete;
  ThreadCountGuard& operator=(const ThreadCountGuard&) = delete;

 private:
  int saved_;
};

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = r;
    i = j + 1;
  }
  return out;
}

}  // namespace

void BenchPlan::validate() const {
  if (group_counts.empty()) throw ConfigError("bench plan needs at least one group count");
  for (int g : group_counts) {
    if (g < 2 || g % 2 != 0) {
      throw ConfigError("bench group counts must be even and >= 2 (got " + std::to_string(g) + ")");
    }
  }
  if (group_size < 1) throw ConfigError("bench group size must be >= 1");
  if (repetitions < 1) throw ConfigError("bench repetitions must be >= 1");
  if (methods.empty()) throw ConfigError("bench plan needs at least one method");
  for (Method m : methods) {
    ExperimentConfig cfg = experiment;
    cfg.method = m;
    cfg.validate();
  }
}

std::uint64_t bench_seed(std::uint64_t base, int group_count, int repetition) {
  return derive_seed(base, static_cast<std::uint64_t>(group_count),
                     static_cast<std::uint64_t>(repetition));
}

std::vector<BenchRecord> run_bench(const BenchPlan& plan,
                                   const std::function<void(const BenchRecord&)>& progress) {
  plan.validate();
  const ThreadCountGuard sequential(1);

  auto make_dataset = [&](int group_count, int rep) {
    SyntheticSpec spec;
    spec.k = group_count / 2;
    spec.group_size = plan.group_size;
    spec.seed = bench_seed(plan.seed_base, group_count, rep);
    return generate_synthetic(spec).first;
  };
  auto config_for = [&](Method m, std::uint64_t seed) {
    ExperimentConfig cfg = plan.experiment;
    cfg.method = m;
    cfg.seed = seed;
    return cfg;
  };

  if (plan.warmup) {
    const int smallest = *std::min_element(plan.group_counts.begin(), plan.group_counts.end());
    const GroupedDataset ds = make_dataset(smallest, 0);
    for (Method m : plan.methods) (void)fit_method(ds, config_for(m, bench_seed(plan.seed_base, smallest, 0)));
  }

  std::vector<BenchRecord> records;
  for (int group_count : plan.group_counts) {
    for (int rep = 0; rep < plan.repetitions; ++rep) {
      const GroupedDataset ds = make_dataset(group_count, rep);
      const std::uint64_t hash = dataset_hash(ds);
      const std::uint64_t seed = bench_seed(plan.seed_base, group_count, rep);
      for (Method m : plan.methods) {
        BenchRecord rec;
        rec.method = m;
        rec.group_count = group_count;
        rec.repetition = rep;
        rec.dataset_hash = hash;
        try {
          const FittedModel model = fit_method(ds, config_for(m, seed));
          rec.timings = model.timings;
          rec.gap = model.gap;
          const Eigen::VectorXd regret =
              group_square_losses(model.predictor(), ds) - erm_losses(ds, model);
          rec.worst_group_regret = worst_group(regret).value;
        } catch (const std::exception& e) {
          throw SolverError("bench cell (method " + std::string(method_name(m)) + ", groups " +
                            std::to_string(group_count) + ", rep " + std::to_string(rep) +
                            "): " + e.what());
        }
        records.push_back(rec);
        if (progress) progress(rec);
      }
    }
  }
  return records;
}

MeanSe mean_se(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("mean_se: no values");
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

std::vector<BenchCell> aggregate(const std::vector<BenchRecord>& records) {
  std::vector<BenchCell> cells;
  std::vector<std::vector<const BenchRecord*>> members;
  for (const auto& r : records) {
    std::size_t i = 0;
    while (i < cells.size() &&
           !(cells[i].method == r.method && cells[i].group_count == r.group_count)) {
      ++i;
    }
    if (i == cells.size()) {
      cells.push_back({});
      cells.back().method = r.method;
      cells.back().group_count = r.group_count;
      members.emplace_back();
    }
    members[i].push_back(&r);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto collect = [&](auto field) {
      std::vector<double> v;
      for (const BenchRecord* r : members[i]) v.push_back(field(*r));
      return mean_se(v);
    };
    cells[i].repetitions = static_cast<int>(members[i].size());
    cells[i].build = collect([](const BenchRecord& r) { return r.timings.build_seconds; });
    cells[i].erm = collect([](const BenchRecord& r) { return r.timings.erm_seconds; });
    cells[i].game = collect([](const BenchRecord& r) { return r.timings.game_seconds; });
    cells[i].total = collect([](const BenchRecord& r) { return r.timings.total_seconds; });
    cells[i].worst_group_regret = collect([](const BenchRecord& r) { return r.worst_group_regret; });
  }
  return cells;
}

void write_bench_raw(const std::vector<BenchRecord>& records, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,group_count,rep,phase,seconds\n";
  for (const auto& r : records) {
    const std::pair<const char*, double> phases[] = {{"build", r.timings.build_seconds},
                                                     {"erm", r.timings.erm_seconds},
                                                     {"game", r.timings.game_seconds},
                                                     {"total", r.timings.total_seconds}};
    for (const auto& [phase, seconds] : phases) {
      out << method_name(r.method) << ',' << r.group_count << ',' << r.repetition << ',' << phase
          << ',' << format_double(seconds) << '\n';
    }
  }
}

void write_bench_records(const std::vector<BenchRecord>& records,
                         const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,group_count,rep,dataset_hash,build_seconds,erm_seconds,game_seconds,"
         "total_seconds,worst_group_regret,gap\n";
  for (const auto& r : records) {
    out << method_name(r.method) << ',' << r.group_count << ',' << r.repetition << ','
        << r.dataset_hash << ',' << format_double(r.timings.build_seconds) << ','
        << format_double(r.timings.erm_seconds) << ',' << format_double(r.timings.game_seconds)
        << ',' << format_double(r.timings.total_seconds) << ','
        << format_double(r.worst_group_regret) << ',' << format_double(r.gap) << '\n';
  }
}

void write_bench_aggregate(const std::vector<BenchCell>& cells, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,group_count,reps,build_mean,build_se,erm_mean,erm_se,game_mean,game_se,"
         "total_mean,total_se,worst_group_regret_mean,worst_group_regret_se\n";
  for (const auto& c : cells) {
    out << method_name(c.method) << ',' << c.group_count << ',' << c.repetitions;
    for (const MeanSe* m : {&c.build, &c.erm, &c.game, &c.total, &c.worst_group_regret}) {
      out << ',' << format_double(m->mean) << ',' << format_double(m->se);
    }
    out << '\n';
  }
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman: need two equal-length series");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace robust_moments
