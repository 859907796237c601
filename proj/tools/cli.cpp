#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "robust_moments/bench.hpp"
#include "robust_moments/common.hpp"
#include "robust_moments/dataset.hpp"
#include "robust_moments/evaluation.hpp"
#include "robust_moments/pipeline.hpp"
#include "robust_moments/property_checks.hpp"
#include "robust_moments/serialization.hpp"

namespace robust_moments::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Raw flag storage shared by all subcommands; only the parsed subcommand's
// options are read.
struct FlagValues {
  std::string config_path;
  std::string method, features, data, out, model;
  int groups = 0, group_size = 0, iters = 0, nystrom_m = 0, nystrom_r = 0, threads = 0, reps = 0;
  std::uint64_t seed = 0;
  double eta = 0, lambda = 0, mu = 0, norm_bound = 0, a_n = 0, gamma = 0, ma_bound = 0,
         payoff_clip = 0;
  std::vector<int> group_counts;
  std::vector<std::string> methods;
  bool no_intercept = false;
  bool inject_fault = false;
};

struct Binding {
  std::string key;
  CLI::Option* option;
  std::function<json()> value;
};

struct Subcommand {
  CLI::App* app = nullptr;
  CLI::Option* config = nullptr;
  std::vector<Binding> bindings;
};

template <typename T>
void bind_option(Subcommand& sc, const std::string& key, const std::string& flag, T& storage,
                 const std::string& help) {
  CLI::Option* opt = sc.app->add_option(flag, storage, help);
  sc.bindings.push_back({key, opt, [&storage] { return json(storage); }});
}

const std::vector<std::string> kMethodNames{"adv-moment", "dro", "mro", "oracle"};

Subcommand make_subcommand(CLI::App& app, const std::string& name, const std::string& description,
                           FlagValues& v) {
  Subcommand sc;
  sc.app = app.add_subcommand(name, description);
  sc.config = sc.app->add_option("--config", v.config_path,
                                 "JSON config file; flags given on the command line override it")
                  ->check(CLI::ExistingFile);
  bind_option(sc, "method", "--method", v.method, "adv-moment | dro | mro | oracle");
  sc.bindings.back().option->check(CLI::IsMember(kMethodNames));
  bind_option(sc, "features", "--features", v.features, "nystrom | linear | rkhs");
  sc.bindings.back().option->check(CLI::IsMember({"nystrom", "linear", "rkhs"}));
  bind_option(sc, "data", "--data", v.data, "CSV dataset (x0..,y,group); default is synthetic data");
  bind_option(sc, "groups", "--groups", v.groups, "synthetic group count 2k (even)");
  bind_option(sc, "group_size", "--group-size", v.group_size, "synthetic samples per group");
  bind_option(sc, "iters", "--iters", v.iters, "iteration count T");
  bind_option(sc, "eta", "--eta", v.eta, "weights step size (default sqrt(log M / T))");
  bind_option(sc, "lambda", "--lambda", v.lambda, "test-function penalty (also the baselines' ridge)");
  bind_option(sc, "mu", "--mu", v.mu, "hypothesis penalty");
  bind_option(sc, "norm_bound", "--norm-bound", v.norm_bound, "coefficient norm bound A");
  bind_option(sc, "a_n", "--a-n", v.a_n, "moment penalty multiplier");
  bind_option(sc, "gamma", "--gamma", v.gamma, "RBF kernel gamma");
  bind_option(sc, "nystrom_m", "--nystrom-m", v.nystrom_m, "Nystrom landmark count");
  bind_option(sc, "nystrom_r", "--nystrom-r", v.nystrom_r, "Nystrom rank");
  bind_option(sc, "seed", "--seed", v.seed, "seed for data generation and landmark sampling");
  bind_option(sc, "out", "--out", v.out, "output directory");
  bind_option(sc, "threads", "--threads", v.threads, "worker threads for per-group work");
  sc.bindings.back().option->envname("ROBUST_MOMENTS_THREADS");
  bind_option(sc, "ma_bound", "--ma-bound", v.ma_bound, "norm bound of the multiaccuracy test class");
  bind_option(sc, "payoff_clip", "--payoff-clip", v.payoff_clip, "clip for normalized payoffs");
  CLI::Option* no_intercept =
      sc.app->add_flag("--no-intercept", v.no_intercept, "linear features without a constant");
  sc.bindings.push_back({"intercept", no_intercept, [&v] { return json(!v.no_intercept); }});
  return sc;
}

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  // A manifest is accepted too: its resolved config is re-used.
  if (j.contains("config") && j.contains("files")) return j.at("config");
  return j;
}

template <typename T>
T get(const json& cfg, const std::string& key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

double get_optional_double(const json& cfg, const std::string& key, double fallback) {
  return cfg.at(key).is_null() ? fallback : get<double>(cfg, key);
}

struct Settings {
  std::string command;
  json config;
  ExperimentConfig experiment;
  std::optional<fs::path> data;
  SyntheticSpec synthetic;
  fs::path out;
  fs::path model;
  int threads = 1;
  double ma_bound = 1.0;
  BenchPlan bench;
  bool inject_fault = false;
};

Settings resolve(const std::string& command, const json& cfg) {
  Settings s;
  s.command = command;
  s.config = cfg;
  ExperimentConfig& e = s.experiment;
  e.method = parse_method(get<std::string>(cfg, "method"));
  e.features = parse_feature_choice(get<std::string>(cfg, "features"));
  e.kernel.gamma = get<double>(cfg, "gamma");
  e.nystrom_m = get<Index>(cfg, "nystrom_m");
  e.nystrom_r = get<Index>(cfg, "nystrom_r");
  e.linear_intercept = get<bool>(cfg, "intercept");
  e.coefficients.lambda = get<double>(cfg, "lambda");
  e.coefficients.mu = get<double>(cfg, "mu");
  e.coefficients.norm_bound =
      get_optional_double(cfg, "norm_bound", std::numeric_limits<double>::infinity());
  e.coefficients.a_n = get<double>(cfg, "a_n");
  e.solver.iterations = get<int>(cfg, "iters");
  if (!cfg.at("eta").is_null()) e.solver.eta = get<double>(cfg, "eta");
  e.solver.payoff_clip = get<double>(cfg, "payoff_clip");
  const auto seed = get<std::uint64_t>(cfg, "seed");
  e.seed = derive_seed(seed, 1, 0);
  e.validate();

  if (!cfg.at("data").is_null()) s.data = fs::path(get<std::string>(cfg, "data"));
  const int groups = get<int>(cfg, "groups");
  if (groups < 2 || groups % 2 != 0) throw ConfigError("--groups must be even and >= 2");
  s.synthetic.k = groups / 2;
  s.synthetic.group_size = get<int>(cfg, "group_size");
  s.synthetic.seed = seed;
  try {
    s.synthetic.validate();
  } catch (const ValidationError& ex) {
    throw ConfigError(ex.what());
  }

  s.out = get<std::string>(cfg, "out");
  s.model = cfg.at("model").is_null() ? s.out / "model.json"
                                      : fs::path(get<std::string>(cfg, "model"));
  s.threads = get<int>(cfg, "threads");
  if (s.threads < 1) throw ConfigError("--threads must be >= 1");
  s.ma_bound = get<double>(cfg, "ma_bound");
  if (!(s.ma_bound > 0.0)) throw ConfigError("ma_bound must be > 0");
  s.inject_fault = get<bool>(cfg, "inject_fault");

  s.bench.group_counts = get<std::vector<int>>(cfg, "group_counts");
  s.bench.group_size = s.synthetic.group_size;
  s.bench.repetitions = get<int>(cfg, "reps");
  s.bench.methods.clear();
  for (const auto& name : get<std::vector<std::string>>(cfg, "methods")) {
    s.bench.methods.push_back(parse_method(name));
  }
  s.bench.seed_base = seed;
  s.bench.experiment = e;
  if (command == "bench") s.bench.validate();
  return s;
}

struct LoadedData {
  GroupedDataset ds;
  std::optional<GroundTruth> gt;
};

LoadedData load_data(const Settings& s) {
  if (s.data) return {load_dataset(*s.data), std::nullopt};
  auto [ds, gt] = generate_synthetic(s.synthetic);
  return {std::move(ds), std::move(gt)};
}

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw ConfigError("cannot create output directory " + out.string());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Collects emitted files and writes the manifest last.
class Manifest {
 public:
  Manifest(const Settings& s, Clock::time_point start) : settings_(s), start_(start) {}

  void add(const fs::path& path) { files_.push_back(path); }
  json& summary() { return summary_; }
  void set_dataset_hash(std::uint64_t h) { dataset_hash_ = h; }

  void write() {
    const fs::path config_path = settings_.out / "config.json";
    {
      auto out = open_out(config_path);
      out << settings_.config.dump(2) << '\n';
    }
    add(config_path);
    json j;
    j["command"] = settings_.command;
    j["version"] = std::string(kVersion);
    j["config"] = settings_.config;
    if (dataset_hash_) j["dataset_hash"] = hex64(*dataset_hash_);
    j["wallclock_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    j["summary"] = summary_;
    j["files"] = json::array();
    for (const auto& f : files_) {
      j["files"].push_back({{"name", f.filename().string()},
                            {"bytes", fs::file_size(f)},
                            {"fnv1a64", file_checksum(f)}});
    }
    auto out = open_out(settings_.out / ("manifest_" + settings_.command + ".json"));
    out << j.dump(2) << '\n';
  }

 private:
  const Settings& settings_;
  Clock::time_point start_;
  std::vector<fs::path> files_;
  json summary_ = json::object();
  std::optional<std::uint64_t> dataset_hash_;
};

json timings_json(const PhaseTimings& t) {
  return {{"build_seconds", t.build_seconds},
          {"erm_seconds", t.erm_seconds},
          {"game_seconds", t.game_seconds},
          {"total_seconds", t.total_seconds}};
}

int cmd_fit(const Settings& s, std::ostream& out) {
  const auto start = Clock::now();
  ensure_out_dir(s.out);
  const LoadedData data = load_data(s);
  const FittedModel model = fit_method(data.ds, s.experiment);
  Manifest manifest(s, start);
  manifest.set_dataset_hash(dataset_hash(data.ds));

  const fs::path model_path = s.out / "model.json";
  save_model(model, model_path);
  manifest.add(model_path);

  const fs::path trace_path = s.out / "trace.csv";
  {
    auto csv = open_out(trace_path);
    csv << "iteration,gap_bound";
    for (std::size_t j = 0; j < data.ds.num_groups(); ++j) csv << ",g_" << j;
    csv << '\n';
    for (std::size_t t = 0; t < model.trace.size(); ++t) {
      csv << t + 1 << ',' << format_double(model.trace[t].gap_bound);
      for (Index j = 0; j < model.trace[t].group_objectives.size(); ++j) {
        csv << ',' << format_double(model.trace[t].group_objectives(j));
      }
      csv << '\n';
    }
  }
  manifest.add(trace_path);

  manifest.summary() = {{"method", std::string(method_name(model.method))},
                        {"groups", data.ds.num_groups()},
                        {"dim", model.alpha.size()},
                        {"upper", model.upper},
                        {"lower", model.lower},
                        {"gap", model.gap},
                        {"timings", timings_json(model.timings)}};
  manifest.write();
  out << "fit " << method_name(model.method) << ": " << data.ds.num_groups() << " groups, "
      << model.alpha.size() << " coefficients, worst-group objective " << model.upper
      << ", gap " << model.gap << ", " << model.timings.total_seconds << " s\n";
  return kExitOk;
}

int cmd_eval(const Settings& s, std::ostream& out) {
  const auto start = Clock::now();
  ensure_out_dir(s.out);
  const FittedModel model = load_model(s.model);
  const LoadedData data = load_data(s);
  if (model.input_dim() != data.ds.covariate_dim()) {
    throw ConfigError("model expects " + std::to_string(model.input_dim()) +
                      "-dimensional covariates but the data has " +
                      std::to_string(data.ds.covariate_dim()));
  }
  const Predictor h = model.predictor();
  const TestFunctionBall ball{evaluation_features(model), s.ma_bound};
  const EvalReport report = evaluate(h, data.ds, erm_losses(data.ds, model), ball,
                                     data.gt ? &*data.gt : nullptr, model.gap);
  Manifest manifest(s, start);
  manifest.set_dataset_hash(dataset_hash(data.ds));

  const fs::path metrics_path = s.out / "metrics.csv";
  {
    auto csv = open_out(metrics_path);
    const bool synthetic = report.mse_to_h0.has_value();
    csv << "group,square_loss,regret,multiaccuracy" << (synthetic ? ",mse_to_h0" : "") << '\n';
    for (Index j = 0; j < report.square_loss.size(); ++j) {
      csv << j << ',' << format_double(report.square_loss(j)) << ','
          << format_double(report.regret(j)) << ',' << format_double(report.multiaccuracy(j));
      if (synthetic) csv << ',' << format_double((*report.mse_to_h0)(j));
      csv << '\n';
    }
    csv << "worst," << format_double(report.worst_square_loss.value) << ','
        << format_double(report.worst_regret.value) << ','
        << format_double(report.worst_multiaccuracy.value);
    if (synthetic) csv << ',' << format_double(report.worst_mse_to_h0->value);
    csv << '\n';
  }
  manifest.add(metrics_path);

  if (!report.fit_curve.empty()) {
    const fs::path curve_path = s.out / "fit_curve.csv";
    auto csv = open_out(curve_path);
    csv << "x,h_of_x\n";
    for (const auto& [x, hx] : report.fit_curve) {
      csv << format_double(x) << ',' << format_double(hx) << '\n';
    }
    csv.close();
    manifest.add(curve_path);
  }

  json& summary = manifest.summary();
  summary["worst_square_loss"] = {{"group", report.worst_square_loss.group},
                                  {"value", report.worst_square_loss.value}};
  summary["worst_regret"] = {{"group", report.worst_regret.group},
                             {"value", report.worst_regret.value}};
  summary["worst_multiaccuracy"] = {{"group", report.worst_multiaccuracy.group},
                                    {"value", report.worst_multiaccuracy.value}};
  if (report.worst_mse_to_h0) {
    summary["worst_mse_to_h0"] = {{"group", report.worst_mse_to_h0->group},
                                  {"value", report.worst_mse_to_h0->value}};
  }
  summary["gap"] = model.gap;
  manifest.write();
  out << "eval " << method_name(model.method) << ": worst-group regret "
      << report.worst_regret.value << " (group " << report.worst_regret.group << ")";
  if (report.worst_mse_to_h0) out << ", worst-group mse to h0 " << report.worst_mse_to_h0->value;
  out << '\n';
  return kExitOk;
}

int cmd_bench(const Settings& s, std::ostream& out) {
  const auto start = Clock::now();
  ensure_out_dir(s.out);
  const auto records = run_bench(s.bench, [&out](const BenchRecord& r) {
    out << "bench " << method_name(r.method) << " groups=" << r.group_count
        << " rep=" << r.repetition << " total=" << r.timings.total_seconds << " s\n";
  });
  const auto cells = aggregate(records);
  Manifest manifest(s, start);
  const fs::path raw = s.out / "bench_raw.csv";
  const fs::path rec = s.out / "bench_records.csv";
  const fs::path agg = s.out / "bench_aggregate.csv";
  write_bench_raw(records, raw);
  write_bench_records(records, rec);
  write_bench_aggregate(cells, agg);
  manifest.add(raw);
  manifest.add(rec);
  manifest.add(agg);
  manifest.summary() = {{"records", records.size()}, {"cells", cells.size()}};
  manifest.write();
  return kExitOk;
}

int cmd_verify(const Settings& s, std::ostream& out) {
  const auto start = Clock::now();
  ensure_out_dir(s.out);
  CheckOptions opts;
  opts.seed = s.synthetic.seed;
  opts.inject_fault = s.inject_fault;
  const auto results = run_all_checks(opts);
  Manifest manifest(s, start);
  const fs::path report = s.out / "verify.csv";
  int failed = 0;
  {
    auto csv = open_out(report);
    csv << "check,passed,max_error,tolerance,detail\n";
    for (const auto& r : results) {
      if (!r.passed) ++failed;
      out << (r.passed ? "PASS " : "FAIL ") << r.name << "  max_error=" << r.max_error
          << " tolerance=" << r.tolerance;
      if (!r.detail.empty()) out << "  (" << r.detail << ')';
      out << '\n';
      csv << r.name << ',' << (r.passed ? 1 : 0) << ',' << format_double(r.max_error) << ','
          << format_double(r.tolerance) << ",\"" << r.detail << "\"\n";
    }
  }
  manifest.add(report);
  manifest.summary() = {{"checks", results.size()}, {"failed", failed}};
  manifest.write();
  out << results.size() - static_cast<std::size_t>(failed) << '/' << results.size()
      << " checks passed\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

}  // namespace

json default_config() {
  int threads = 1;
  if (const char* env = std::getenv("ROBUST_MOMENTS_THREADS")) {
    try {
      threads = std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      threads = 1;
    }
  }
  return {{"method", "adv-moment"},
          {"features", "nystrom"},
          {"data", nullptr},
          {"groups", 50},
          {"group_size", 100},
          {"iters", 5000},
          {"eta", nullptr},
          {"lambda", 1e-3},
          {"mu", 1e-6},
          {"norm_bound", nullptr},
          {"a_n", 1.0},
          {"gamma", 1.0},
          {"nystrom_m", 100},
          {"nystrom_r", 100},
          {"intercept", true},
          {"seed", 0},
          {"out", "out"},
          {"model", nullptr},
          {"threads", threads},
          {"ma_bound", 1.0},
          {"payoff_clip", 1.0},
          {"group_counts", {2, 10, 18, 26, 34, 42, 50}},
          {"reps", 3},
          {"methods", {"adv-moment", "dro", "mro"}},
          {"inject_fault", false}};
}

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return hex64(h);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributionally robust regression: adversarial-moment solver, group DRO and "
               "MRO baselines.\nSettings come from built-in defaults, then --config, then "
               "command-line flags (flags win)."};
  app.name(args.empty() ? "robust-moments" : fs::path(args.front()).filename().string());
  app.require_subcommand(1, 1);
  FlagValues v;
  std::vector<Subcommand> subs;
  subs.push_back(make_subcommand(app, "fit", "fit a model and write model.json, trace.csv", v));
  subs.push_back(make_subcommand(app, "eval", "evaluate a fitted model: metrics.csv, fit_curve.csv", v));
  bind_option(subs.back(), "model", "--model", v.model, "model file (default <out>/model.json)");
  subs.push_back(make_subcommand(app, "bench", "runtime scaling over group counts", v));
  bind_option(subs.back(), "group_counts", "--group-counts", v.group_counts, "group counts to sweep");
  subs.back().bindings.back().option->delimiter(',');
  bind_option(subs.back(), "reps", "--reps", v.reps, "repetitions per cell");
  bind_option(subs.back(), "methods", "--methods", v.methods, "methods to time");
  subs.back().bindings.back().option->delimiter(',')->check(CLI::IsMember(kMethodNames));
  subs.push_back(make_subcommand(app, "verify", "run the numerical property checks", v));
  CLI::Option* fault = subs.back().app->add_flag(
      "--inject-fault", v.inject_fault, "flip the completing-square sign (the check must fail)");
  subs.back().bindings.push_back({"inject_fault", fault, [&v] { return json(v.inject_fault); }});

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("robust-moments");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Subcommand* active = nullptr;
  for (const auto& sc : subs) {
    if (sc.app->parsed()) active = &sc;
  }

  std::set<std::string> seen_warnings;
  set_warning_handler([&](std::string_view msg) {
    if (seen_warnings.insert(std::string(msg)).second) err << "warning: " << msg << '\n';
  });
  struct HandlerReset {
    ~HandlerReset() { set_warning_handler(nullptr); }
  } reset;

  try {
    json cfg = default_config();
    std::set<std::string> explicit_keys;
    if (active->config->count() > 0) {
      const json file = load_config_file(v.config_path);
      for (const auto& [key, value] : file.items()) {
        if (!cfg.contains(key)) throw ConfigError("unknown config key '" + key + "'");
        cfg[key] = value;
        explicit_keys.insert(key);
      }
    }
    for (const auto& b : active->bindings) {
      if (b.option->count() > 0) {
        cfg[b.key] = b.value();
        explicit_keys.insert(b.key);
      }
    }
    if (!cfg["data"].is_null() &&
        (explicit_keys.count("groups") > 0 || explicit_keys.count("group_size") > 0)) {
      throw ConfigError("give either a data file or synthetic settings (--groups, --group-size), "
                        "not both");
    }
    const Settings s = resolve(active->app->get_name(), cfg);
    set_num_threads(s.threads);
    if (s.command == "fit") return cmd_fit(s, out);
    if (s.command == "eval") return cmd_eval(s, out);
    if (s.command == "bench") return cmd_bench(s, out);
    return cmd_verify(s, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace robust_moments::cli
