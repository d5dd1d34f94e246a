#include <adaptexp/analysis.hpp>
#include <adaptexp/store.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace adaptexp {
namespace {

TrialRecord synthetic(std::int64_t trial, Mechanism m, std::int64_t wave, LossVector l) {
  TrialRecord r;
  r.trial = trial;
  r.mechanism = m;
  r.wave_size = wave;
  r.losses = l;
  return r;
}

LossVector losses(double r_sample, double r_policy, double prec_best, double prec_avg, int sp) {
  return LossVector{r_sample, r_policy, prec_best, prec_avg, sp};
}

const WinCell& cell(const WinMatrix& wm, BaseMeasure a, BaseMeasure b) {
  for (const auto& c : wm.cells) {
    if (c.spec == HybridSpec{a, b}) return c;
  }
  throw std::logic_error("no such cell");
}

TEST(MeanCi, HandArithmetic) {
  const std::vector<double> v = {0.1, 0.2, 0.3};
  const auto ci = mean_ci(v);
  EXPECT_NEAR(ci.mean, 0.2, 1e-15);
  EXPECT_NEAR(ci.half_width, 1.96 * 0.1 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(ci.half_width, 0.11316, 1e-5);
  EXPECT_EQ(ci.n, 3u);
  const std::vector<double> flat = {0.4, 0.4, 0.4, 0.4};
  EXPECT_EQ(mean_ci(flat).half_width, 0.0);
  EXPECT_THROW(mean_ci(std::vector<double>{}), ContractError);
}

TEST(MeanCi, CoverageIsNearNominal) {
  Rng rng(1);
  std::bernoulli_distribution coin(0.5);
  int covered = 0;
  constexpr int reruns = 400;
  std::vector<double> v(10'000);
  for (int rep = 0; rep < reruns; ++rep) {
    for (double& x : v) x = coin(rng) ? 1.0 : 0.0;
    const auto ci = mean_ci(v);
    if (ci.lower() <= 0.5 && 0.5 <= ci.upper()) ++covered;
  }
  // Binomial(400, 0.95) sits in [0.92, 0.98] with overwhelming probability.
  EXPECT_GT(covered, static_cast<int>(0.92 * reruns));
  EXPECT_LT(covered, static_cast<int>(0.98 * reruns));
}

TEST(AggregateMeans, GroupsAndWarnings) {
  std::vector<TrialRecord> recs;
  for (int t = 0; t < 3; ++t) {
    recs.push_back(synthetic(t, Mechanism::ra, 4, losses(0.1 * (t + 1), 0, 0, 0, 0)));
    recs.push_back(synthetic(t, Mechanism::thompson, 4, losses(0.05, 0, 0, 0, 0)));
  }
  recs.push_back(synthetic(0, Mechanism::ra, 10, losses(0.3, 0, 0, 0, 1)));
  const auto agg = aggregate_means(recs, BaseMeasure::r_sample);
  ASSERT_EQ(agg.rows.size(), 3u);
  EXPECT_EQ(agg.rows[0].mechanism, Mechanism::ra);
  EXPECT_EQ(agg.rows[0].wave_size, 4);
  EXPECT_NEAR(agg.rows[0].ci.mean, 0.2, 1e-15);
  EXPECT_NEAR(agg.rows[0].ci.half_width, 0.11316, 1e-5);
  EXPECT_EQ(agg.rows[1].wave_size, 10);
  EXPECT_EQ(agg.rows[1].ci.n, 1u);
  // One single-record group and one empty group (thompson at 10).
  EXPECT_EQ(agg.warnings.size(), 2u);
}

TEST(AggregateMeans, InvariantToRecordOrder) {
  std::vector<TrialRecord> recs;
  Rng rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    for (auto m : kAllMechanisms) {
      recs.push_back(synthetic(t, m, 4, losses(unit(rng), unit(rng), unit(rng), unit(rng), t % 2)));
    }
  }
  auto shuffled = recs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto measure : kAllMeasures) {
    const auto a = aggregate_means(recs, measure);
    const auto b = aggregate_means(shuffled, measure);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      EXPECT_EQ(a.rows[i].ci.mean, b.rows[i].ci.mean);
      EXPECT_EQ(a.rows[i].ci.half_width, b.rows[i].ci.half_width);
    }
  }
}

std::vector<TrialRecord> four_mechanism_trial(std::int64_t trial, std::array<double, 4> r_sample,
                                              std::array<int, 4> sp = {0, 0, 0, 0}) {
  std::vector<TrialRecord> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out.push_back(synthetic(trial, kAllMechanisms[i], 4, losses(r_sample[i], 0.0, 0.1, 0.2, sp[i])));
  }
  return out;
}

void append(std::vector<TrialRecord>& to, const std::vector<TrialRecord>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

TEST(WinMatrixPerTrial, Counting) {
  std::vector<TrialRecord> recs;
  append(recs, four_mechanism_trial(0, {0.1, 0.2, 0.3, 0.4}));
  append(recs, four_mechanism_trial(1, {0.1, 0.2, 0.3, 0.4}));
  append(recs, four_mechanism_trial(2, {0.5, 0.2, 0.3, 0.4}));
  const auto wm = win_matrix_per_trial(recs, 4);
  ASSERT_EQ(wm.cells.size(), 15u);
  const auto& c = cell(wm, BaseMeasure::r_sample, BaseMeasure::r_sample);
  EXPECT_NEAR(c.values[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(c.values[1], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(c.values[2], 0.0);
  EXPECT_EQ(c.values[3], 0.0);
  EXPECT_EQ(c.winner, Mechanism::ra);
}

TEST(WinMatrixPerTrial, TiesSplitEvenly) {
  std::vector<TrialRecord> recs;
  append(recs, four_mechanism_trial(0, {0.1, 0.2, 0.3, 0.4}, {1, 1, 1, 1}));
  const auto wm = win_matrix_per_trial(recs, 4);
  const auto& c = cell(wm, BaseMeasure::sp, BaseMeasure::sp);
  for (double v : c.values) EXPECT_EQ(v, 0.25);
  // SP hybrids are 1 on every mechanism, so they tie as well.
  const auto& h = cell(wm, BaseMeasure::r_sample, BaseMeasure::sp);
  for (double v : h.values) EXPECT_EQ(v, 0.25);
  // prec_avg is 0.2 for every mechanism: four-way split.
  const auto& p = cell(wm, BaseMeasure::prec_avg, BaseMeasure::prec_avg);
  for (double v : p.values) EXPECT_EQ(v, 0.25);
}

TEST(WinMatrixPerTrial, DominantMechanismTakesEverything) {
  std::vector<TrialRecord> recs;
  for (int t = 0; t < 20; ++t) append(recs, four_mechanism_trial(t, {0.3, 0.01 * t, 0.5, 0.4}));
  const auto wm = win_matrix_per_trial(recs, 4);
  const auto& c = cell(wm, BaseMeasure::r_sample, BaseMeasure::r_sample);
  EXPECT_EQ(c.values[1], 1.0);
  EXPECT_EQ(c.winner, Mechanism::thompson);
  const auto avg = win_matrix_avg(recs, 4);
  for (std::size_t i = 0; i < wm.cells.size(); ++i) EXPECT_EQ(avg.cells[i].winner, wm.cells[i].winner);
}

TEST(WinMatrixPerTrial, MissingMechanismExcludesTrial) {
  std::vector<TrialRecord> recs;
  append(recs, four_mechanism_trial(0, {0.1, 0.2, 0.3, 0.4}));
  auto partial = four_mechanism_trial(1, {0.5, 0.2, 0.3, 0.4});
  partial.pop_back();
  append(recs, partial);
  const auto wm = win_matrix_per_trial(recs, 4);
  EXPECT_EQ(wm.trials_used, 1u);
  EXPECT_EQ(wm.trials_excluded, 1u);
  EXPECT_EQ(cell(wm, BaseMeasure::r_sample, BaseMeasure::r_sample).values[0], 1.0);
}

TEST(WinMatrixAvg, ArgminAndTieRule) {
  std::vector<TrialRecord> recs;
  append(recs, four_mechanism_trial(0, {0.10, 0.12, 0.30, 0.31}));
  auto wm = win_matrix_avg(recs, 4);
  auto c = cell(wm, BaseMeasure::r_sample, BaseMeasure::r_sample);
  EXPECT_EQ(c.winner, Mechanism::ra);
  EXPECT_FALSE(c.winner_tied);
  EXPECT_EQ(c.values[2], 0.30);
  EXPECT_EQ(win_matrix_per_trial(recs, 4).cells[0].winner, c.winner);

  recs.clear();
  append(recs, four_mechanism_trial(0, {0.3, 0.2, 0.2, 0.4}));
  wm = win_matrix_avg(recs, 4);
  c = cell(wm, BaseMeasure::r_sample, BaseMeasure::r_sample);
  EXPECT_EQ(c.winner, Mechanism::thompson);
  EXPECT_TRUE(c.winner_tied);
}

std::vector<TrialRecord> random_records(Rng& rng, int trials) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.4);
  std::vector<TrialRecord> recs;
  for (int t = 0; t < trials; ++t) {
    for (auto m : kAllMechanisms) {
      for (std::int64_t w : {4, 100}) {
        // Coarse values so exact ties happen.
        const auto q = [&] { return std::round(unit(rng) * 4.0) / 4.0; };
        recs.push_back(synthetic(t, m, w, losses(q(), q(), q(), q(), coin(rng) ? 1 : 0)));
      }
    }
  }
  return recs;
}

TEST(WinMatrix, Invariants) {
  Rng rng(3);
  const auto recs = random_records(rng, 60);
  for (std::int64_t w : {4, 100}) {
    const auto wm = win_matrix_per_trial(recs, w);
    for (const auto& c : wm.cells) {
      double total = 0.0;
      for (double v : c.values) total += v;
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
    // Diagonal equals a direct analysis of the base measure.
    const auto paired = paired_trials(recs, w);
    for (auto m : kAllMeasures) {
      std::vector<std::vector<double>> direct;
      for (const auto& t : paired.trials) {
        std::vector<double> row;
        for (auto mech : kAllMechanisms) row.push_back(t.by_mechanism[mechanism_id(mech)].get(m));
        direct.push_back(row);
      }
      const auto shares = win_shares(direct);
      const auto& diag = cell(wm, m, m);
      for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(diag.values[i], shares[i]);
    }
    // SP hybrids are 1 exactly on the sp=1 trials.
    for (const auto& t : paired.trials) {
      for (const auto& lv : t.by_mechanism) {
        for (auto m : kAllMeasures) {
          if (m == BaseMeasure::sp) continue;
          const double h = hybrid_loss({m, BaseMeasure::sp}, lv);
          EXPECT_EQ(h == 1.0, lv.sp == 1 || lv.get(m) == 1.0);
        }
      }
    }
  }
  // Order invariance.
  auto shuffled = recs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (std::int64_t w : {4, 100}) {
    const auto a = win_matrix_per_trial(recs, w);
    const auto b = win_matrix_per_trial(shuffled, w);
    const auto c = win_matrix_avg(recs, w);
    const auto d = win_matrix_avg(shuffled, w);
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      EXPECT_EQ(a.cells[i].values, b.cells[i].values);
      EXPECT_EQ(a.cells[i].winner, b.cells[i].winner);
      EXPECT_EQ(c.cells[i].values, d.cells[i].values);
    }
  }
}

TEST(Csv, Schemas) {
  Rng rng(4);
  const auto recs = random_records(rng, 5);
  std::ostringstream agg;
  write_aggregate_header(agg);
  write_aggregate_rows(agg, aggregate_means(recs, BaseMeasure::prec_avg).rows);
  std::istringstream lines(agg.str());
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "measure,mechanism,wave_size,mean,ci_half_width,n");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  EXPECT_EQ(rows, 8);

  std::ostringstream wm;
  write_winmatrix_header(wm);
  write_winmatrix_rows(wm, win_matrix_avg(recs, 4));
  std::istringstream wl(wm.str());
  std::getline(wl, header);
  EXPECT_EQ(header,
            "measure_a,measure_b,wave_size,winner,prop_ra,prop_thompson,prop_exploration,"
            "prop_tempered,mode");
  std::string first;
  std::getline(wl, first);
  EXPECT_EQ(first.rfind("r_sample,r_sample,4,", 0), 0u);
  EXPECT_EQ(first.substr(first.size() - 4), ",avg");
}

}  // namespace
}  // namespace adaptexp
