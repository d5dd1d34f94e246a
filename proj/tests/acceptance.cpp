// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance [--store PATH] [--threads N]
//
// Without --store the desk-scale study (1000 replications, 1000 MC draws,
// defaults otherwise) is simulated first; that dominates the runtime.

#include <adaptexp/adaptexp.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace adaptexp;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << what << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5f", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using Means = std::map<std::pair<Mechanism, std::int64_t>, MeanCI>;

Means means_of(const std::vector<TrialRecord>& records, BaseMeasure m) {
  Means out;
  for (const auto& row : aggregate_means(records, m).rows) out[{row.mechanism, row.wave_size}] = row.ci;
  return out;
}

void oracle_criteria() {
  const auto results = run_oracle_suite();
  auto find = [&](const std::string& name) -> const CheckResult& {
    for (const auto& r : results)
      if (r.name == name) return r;
    throw std::logic_error("missing oracle check " + name);
  };
  const auto& c1 = find("prob_best_mc_vs_quadrature");
  report(1, c1.passed, "prob_best MC vs quadrature max gap " + fmt(c1.max_deviation) + " < 0.005");
  const auto& c2 = find("quadrature_two_arm_analytic");
  std::ostringstream dev2;
  dev2 << c2.max_deviation;
  report(2, c2.passed, "Beta(2,1) vs Beta(1,1) quadrature deviation " + dev2.str() + " < 1e-6");
  const auto& c3 = find("rmse_closed_form_vs_mc");
  report(3, c3.passed, "rmse closed form vs MC max gap " + fmt(c3.max_deviation) + " < 0.005");
  const auto& t = find("tempered_endpoints_exact");
  const auto& e = find("exploration_hand_value");
  std::ostringstream dev4;
  dev4 << "tempered endpoints deviation " << t.max_deviation << " == 0, exploration deviation "
       << e.max_deviation << " < 1e-12";
  report(4, t.passed && e.passed, dev4.str());
}

void directional_criteria(const std::vector<TrialRecord>& records, const std::vector<std::int64_t>& sizes) {
  const auto rs = means_of(records, BaseMeasure::r_sample);
  const auto rp = means_of(records, BaseMeasure::r_policy);
  const auto pa = means_of(records, BaseMeasure::prec_avg);
  const auto sp = means_of(records, BaseMeasure::sp);
  using M = Mechanism;

  {
    bool ok = true;
    std::ostringstream d;
    for (auto w : sizes) {
      const auto& th = rs.at({M::thompson, w});
      bool lowest = true;
      for (auto m : {M::ra, M::exploration, M::tempered}) lowest = lowest && th.mean < rs.at({m, w}).mean;
      const bool disjoint = th.disjoint_from(rs.at({M::ra, w}));
      ok = ok && lowest && disjoint;
      d << " N_t=" << w << " thompson " << fmt(th.mean) << " ra " << fmt(rs.at({M::ra, w}).mean)
        << (lowest ? "" : " (not lowest)") << (disjoint ? "" : " (CIs overlap)");
    }
    report(5, ok, "R_sample lowest for Thompson, CI disjoint from RA:" + d.str());
  }
  {
    const double th4 = pa.at({M::thompson, 4}).mean;
    const double ra4 = pa.at({M::ra, 4}).mean;
    const double th100 = pa.at({M::thompson, 100}).mean;
    report(6, th4 > ra4 && th4 > th100,
           "PREC_avg Thompson N_t=4 " + fmt(th4) + " > RA " + fmt(ra4) + " and > Thompson N_t=100 " +
               fmt(th100));
  }
  {
    bool ok = true;
    std::ostringstream d;
    for (auto w : sizes) {
      const auto& ex = sp.at({M::exploration, w});
      const auto& ra = sp.at({M::ra, w});
      ok = ok && ex.mean < ra.mean;
      if (w == 4) ok = ok && ex.disjoint_from(ra);
      d << " N_t=" << w << " exploration " << fmt(ex.mean) << " ra " << fmt(ra.mean);
    }
    report(7, ok, "SP Exploration below RA, CIs disjoint at N_t=4:" + d.str());
  }
  {
    bool ok = true;
    std::ostringstream d;
    for (auto w : sizes) {
      const double te = rs.at({M::tempered, w}).mean;
      const double th = rs.at({M::thompson, w}).mean;
      const double ra = rs.at({M::ra, w}).mean;
      ok = ok && th < te && te < ra;
      d << " N_t=" << w << " " << fmt(th) << " < " << fmt(te) << " < " << fmt(ra);
    }
    report(8, ok, "R_sample Tempered between Thompson and RA:" + d.str());
  }
  {
    bool ok = true;
    std::ostringstream d;
    for (auto m : kAllMechanisms) {
      const double v = rp.at({m, 100}).mean;
      ok = ok && v < 0.05;
      d << " " << mechanism_name(m) << " " << fmt(v);
    }
    report(9, ok, "R_policy < 0.05 at N_t=100:" + d.str());
  }
}

void determinism_criterion(const ExperimentConfig& desk, const fs::path& dir) {
  ExperimentConfig c = desk;
  c.replications = 50;
  auto write = [&](const fs::path& p, unsigned threads) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    StoreWriter w(out);
    run_study(c, std::ref(w), threads);
  };
  write(dir / "t1.jsonl", 1);
  write(dir / "t8.jsonl", 8);
  write(dir / "t1b.jsonl", 1);
  const auto a = slurp(dir / "t1.jsonl");
  const bool ok = !a.empty() && a == slurp(dir / "t8.jsonl") && a == slurp(dir / "t1b.jsonl");
  report(10, ok, "store bytes identical at 1 and 8 threads and on rerun (" + std::to_string(a.size()) +
                     " bytes, " + std::to_string(c.replications) + " replications)");
}

void lint_criterion(const std::vector<TrialRecord>& records, const ExperimentConfig& desk) {
  const auto rep = lint_store(records, {desk.n_total, desk.prior});
  const bool complete = records.size() == study_cells(desk).size() * static_cast<std::size_t>(desk.replications);
  std::string what = std::to_string(rep.records) + " records linted, " + std::to_string(rep.bad_records) +
                     " violations";
  if (!complete) what += ", store incomplete";
  if (!rep.messages.empty()) what += "; first: " + rep.messages.front();
  report(11, rep.ok() && complete, what);
}

void winmatrix_criterion(const std::vector<TrialRecord>& records, const std::vector<std::int64_t>& sizes) {
  double worst_sum = 0.0;
  double worst_diag = 0.0;
  bool winners_match = true;
  for (auto w : sizes) {
    const auto per = win_matrix_per_trial(records, w);
    const auto avg = win_matrix_avg(records, w);
    for (const auto& cell : per.cells) {
      double sum = 0.0;
      for (double v : cell.values) sum += v;
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
    // Standalone per-trial analysis of each base measure.
    for (auto m : kAllMeasures) {
      std::vector<std::vector<double>> losses;
      std::map<std::int64_t, std::vector<double>> rows;
      for (const auto& r : records) {
        if (r.wave_size != w) continue;
        auto& row = rows[r.trial];
        row.resize(4);
        row[mechanism_id(r.mechanism)] = r.losses.get(m);
      }
      for (auto& [_, row] : rows) losses.push_back(row);
      std::array<double, 4> share{};
      for (const auto& row : losses) {
        const double best = *std::min_element(row.begin(), row.end());
        const double n_best = static_cast<double>(std::count(row.begin(), row.end(), best));
        for (std::size_t i = 0; i < 4; ++i)
          if (row[i] == best) share[i] += 1.0 / n_best;
      }
      const auto means = means_of(records, m);
      Mechanism mean_winner = Mechanism::ra;
      for (auto mech : kAllMechanisms)
        if (means.at({mech, w}).mean < means.at({mean_winner, w}).mean) mean_winner = mech;
      for (const auto& cell : per.cells) {
        if (cell.spec.a != m || !cell.spec.diagonal()) continue;
        for (std::size_t i = 0; i < 4; ++i)
          worst_diag = std::max(worst_diag, std::abs(cell.values[i] - share[i] / static_cast<double>(losses.size())));
      }
      for (const auto& cell : avg.cells) {
        if (cell.spec.a != m || !cell.spec.diagonal()) continue;
        winners_match = winners_match && cell.winner == mean_winner;
        for (auto mech : kAllMechanisms)
          worst_diag = std::max(worst_diag, std::abs(cell.values[mechanism_id(mech)] - means.at({mech, w}).mean));
      }
    }
  }
  std::ostringstream d;
  d << "max |sum-1| " << worst_sum << " (tol 1e-9), max diagonal deviation " << worst_diag << " (tol 1e-12)"
    << (winners_match ? "" : ", avg-mode diagonal winner differs");
  report(12, worst_sum <= 1e-9 && worst_diag <= 1e-12 && winners_match, d.str());
}

}  // namespace

int main(int argc, char** argv) {
  std::string store_arg;
  unsigned threads = default_threads();
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--store" && i + 1 < argc) {
      store_arg = argv[++i];
    } else if (a == "--threads" && i + 1 < argc) {
      threads = static_cast<unsigned>(std::stoul(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--store PATH] [--threads N]\n";
      return 2;
    }
  }

  ExperimentConfig desk;
  desk.replications = 1000;
  desk.mc_draws = 1000;

  const fs::path dir = fs::temp_directory_path() / "adaptexp_acceptance";
  fs::create_directories(dir);

  try {
    oracle_criteria();

    fs::path store = store_arg;
    if (store_arg.empty()) {
      store = dir / "desk.jsonl";
      const auto t0 = std::chrono::steady_clock::now();
      std::ofstream out(store, std::ios::binary | std::ios::trunc);
      StoreWriter w(out);
      run_study(desk, std::ref(w), threads);
      out.close();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "desk-scale run: " << w.written() << " records, " << threads << " thread(s), "
                << fmt(secs) << " s" << std::endl;
    }
    const auto records = read_store(store.string());
    const auto sizes = wave_sizes_in(records);

    directional_criteria(records, sizes);
    determinism_criterion(desk, dir);
    lint_criterion(records, desk);
    winmatrix_criterion(records, sizes);
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
