// adaptexp: run adaptive-experiment studies and analyse their run stores.
//
// Exit codes: 0 success, 1 validation/analysis failure, 2 usage/config error.

#include <adaptexp/adaptexp.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace adaptexp;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

std::string valid_measure_names() {
  std::string s;
  for (auto m : kAllMeasures) {
    if (!s.empty()) s += ", ";
    s += measure_name(m);
  }
  return s + ", all";
}

// Loads a store for analysis; prints the problem and returns nullopt on failure.
std::optional<std::vector<TrialRecord>> load_nonempty_store(const std::string& path) {
  try {
    auto records = read_store(path);
    if (records.empty()) {
      std::cerr << "error: run store '" << path << "' has no records\n";
      return std::nullopt;
    }
    return records;
  } catch (const FormatError& e) {
    std::cerr << "error: " << path << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

bool write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
  out.flush();
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return false;
  }
  return true;
}

std::string aggregate_csv(const std::vector<TrialRecord>& records,
                          const std::vector<BaseMeasure>& measures) {
  std::ostringstream csv;
  write_aggregate_header(csv);
  for (auto m : measures) {
    const auto agg = aggregate_means(records, m);
    for (const auto& w : agg.warnings) std::cerr << "warning: " << w << '\n';
    write_aggregate_rows(csv, agg.rows);
  }
  return csv.str();
}

std::string winmatrix_csv(const std::vector<TrialRecord>& records, WinMode mode) {
  std::ostringstream csv;
  write_winmatrix_header(csv);
  for (auto w : wave_sizes_in(records)) {
    const auto wm = mode == WinMode::per_trial ? win_matrix_per_trial(records, w)
                                               : win_matrix_avg(records, w);
    if (wm.trials_excluded > 0) {
      std::cerr << "warning: wave size " << w << ": " << wm.trials_excluded
                << " trial(s) excluded for missing mechanisms\n";
    }
    write_winmatrix_rows(csv, wm);
  }
  return csv.str();
}

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = default_threads();
};

int cmd_run(const RunArgs& args) {
  ExperimentConfig config;
  try {
    config = load_config(args.config);
    if (args.seed) config.master_seed = *args.seed;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  }

  std::ofstream out(args.out, std::ios::binary | std::ios::trunc);
  if (!out) {
    std::cerr << "error: cannot open '" << args.out << "' for writing\n";
    return kUsage;
  }
  StoreWriter writer(out);
  Manifest manifest;
  manifest.threads = args.threads;
  const auto start = std::chrono::steady_clock::now();
  int status = kOk;
  try {
    run_study(config, std::ref(writer), args.threads);
    out.flush();
    if (!out) throw std::runtime_error("flushing run store failed");
    manifest.status = "complete";
  } catch (const std::exception& e) {
    std::cerr << "error: study aborted: " << e.what() << '\n';
    manifest.status = "partial";
    manifest.error = e.what();
    status = kFailure;
  }
  manifest.records = writer.written();
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!write_file(manifest_path(args.out), manifest_to_json(config, manifest).dump(2) + "\n")) {
    status = kFailure;
  }
  std::cerr << manifest.records << " records written to " << args.out << " in "
            << manifest.wall_seconds << " s\n";
  return status;
}

int cmd_aggregate(const std::string& in, const std::string& out, const std::string& measure) {
  std::vector<BaseMeasure> measures;
  if (measure == "all") {
    measures.assign(kAllMeasures.begin(), kAllMeasures.end());
  } else if (auto m = parse_measure(measure)) {
    measures.push_back(*m);
  } else {
    std::cerr << "error: unknown measure '" << measure << "'; valid names: " << valid_measure_names()
              << '\n';
    return kUsage;
  }
  const auto records = load_nonempty_store(in);
  if (!records) return kFailure;
  return write_file(out, aggregate_csv(*records, measures)) ? kOk : kFailure;
}

int cmd_winmatrix(const std::string& in, const std::string& out, const std::string& mode) {
  const auto records = load_nonempty_store(in);
  if (!records) return kFailure;
  return write_file(out, winmatrix_csv(*records, mode == "avg" ? WinMode::avg : WinMode::per_trial))
             ? kOk
             : kFailure;
}

int cmd_figures_data(const std::string& in, const std::string& out_dir) {
  const auto records = load_nonempty_store(in);
  if (!records) return kFailure;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create '" << out_dir << "': " << ec.message() << '\n';
    return kUsage;
  }
  const fs::path dir(out_dir);
  const std::vector<BaseMeasure> all(kAllMeasures.begin(), kAllMeasures.end());

  std::int64_t n_total = 0;
  for (auto c : records->front().counts) n_total += c;
  Json meta{{"n_total", n_total}, {"wave_sizes", wave_sizes_in(*records)}};
  // Only mechanisms present in the store; absent ones read as 0 in the win-matrix columns.
  std::set<Mechanism> present;
  for (const auto& r : *records) present.insert(r.mechanism);
  Json mechs = Json::array();
  for (auto m : present) mechs.push_back(std::string(mechanism_name(m)));
  meta["mechanisms"] = mechs;
  Json measures = Json::array();
  for (auto m : kAllMeasures) measures.push_back(std::string(measure_name(m)));
  meta["measures"] = measures;
  meta["files"] = {{"aggregate", "aggregate.csv"},
                   {"winmatrix_per_trial", "winmatrix_per_trial.csv"},
                   {"winmatrix_avg", "winmatrix_avg.csv"}};

  const bool ok =
      write_file((dir / "aggregate.csv").string(), aggregate_csv(*records, all)) &&
      write_file((dir / "winmatrix_per_trial.csv").string(),
                 winmatrix_csv(*records, WinMode::per_trial)) &&
      write_file((dir / "winmatrix_avg.csv").string(), winmatrix_csv(*records, WinMode::avg)) &&
      write_file((dir / "figures_meta.json").string(), meta.dump(2) + "\n");
  return ok ? kOk : kFailure;
}

struct ValidateArgs {
  ValidationOptions options;
  std::string store;
  std::string config;
};

int cmd_validate(const ValidateArgs& args) {
  bool all_passed = true;
  std::cout << std::left;
  for (const auto& r : run_oracle_suite(args.options)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": max deviation " << r.max_deviation
              << " (threshold " << r.threshold << ")";
    if (!r.note.empty()) std::cout << " [" << r.note << "]";
    std::cout << '\n';
    all_passed = all_passed && r.passed;
  }

  if (!args.store.empty()) {
    LintExpectations expect;
    std::string config_path = args.config;
    if (config_path.empty() && fs::exists(manifest_path(args.store))) config_path = manifest_path(args.store);
    if (!config_path.empty()) {
      try {
        std::ifstream in(config_path);
        auto j = Json::parse(in);
        if (j.contains("config")) j = j["config"];
        const auto config = config_from_json(j);
        expect.n_total = config.n_total;
        expect.prior = config.prior;
      } catch (const std::exception& e) {
        std::cerr << "config error: " << config_path << ": " << e.what() << '\n';
        return kUsage;
      }
    }
    try {
      const auto records = read_store(args.store);
      const auto report = lint_store(records, expect);
      std::cout << (report.ok() ? "PASS " : "FAIL ") << "store_lint: " << report.bad_records
                << " of " << report.records << " records inconsistent\n";
      for (const auto& m : report.messages) std::cout << "  " << m << '\n';
      all_passed = all_passed && report.ok() && report.records > 0;
    } catch (const FormatError& e) {
      std::cout << "FAIL store_lint: " << e.what() << '\n';
      all_passed = false;
    }
  }
  return all_passed ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive experiment simulation and analysis"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a replication study into a run store");
  run->add_option("config", run_args.config, "JSON experiment config")->required();
  run->add_option("--out", run_args.out, "Run store output path")->required();
  run->add_option("--seed", run_args.seed, "Override master_seed");
  run->add_option("--threads", run_args.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string agg_in, agg_out, agg_measure = "all";
  auto* agg = app.add_subcommand("aggregate", "Mean loss and 95% interval per mechanism and wave size");
  agg->add_option("--in", agg_in, "Run store")->required();
  agg->add_option("--out", agg_out, "CSV output path")->required();
  agg->add_option("--measure", agg_measure, "Base measure name or 'all'");

  std::string wm_in, wm_out, wm_mode = "per-trial";
  auto* wm = app.add_subcommand("winmatrix", "Win matrices over base and hybrid measures");
  wm->add_option("--in", wm_in, "Run store")->required();
  wm->add_option("--out", wm_out, "CSV output path")->required();
  wm->add_option("--mode", wm_mode, "per-trial or avg")->check(CLI::IsMember({"per-trial", "avg"}));

  ValidateArgs val_args;
  auto* val = app.add_subcommand("validate", "Run the oracle suite, optionally lint a run store");
  val->add_option("--seed", val_args.options.seed, "Oracle RNG seed");
  val->add_option("--quad-nodes", val_args.options.quadrature_nodes, "Quadrature node count");
  val->add_option("--store", val_args.store, "Run store to lint");
  val->add_option("--config", val_args.config, "Config for the store (defaults to its manifest)");

  std::string fig_in, fig_dir;
  auto* fig = app.add_subcommand("figures-data", "Write every CSV the plotting scripts read");
  fig->add_option("--in", fig_in, "Run store")->required();
  fig->add_option("--out-dir", fig_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*run) return cmd_run(run_args);
  if (*agg) return cmd_aggregate(agg_in, agg_out, agg_measure);
  if (*wm) return cmd_winmatrix(wm_in, wm_out, wm_mode);
  if (*val) return cmd_validate(val_args);
  if (*fig) return cmd_figures_data(fig_in, fig_dir);
  return kUsage;
}
