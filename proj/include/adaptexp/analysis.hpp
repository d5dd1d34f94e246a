#pragma once

// Aggregation of trial records: mean losses with 95% intervals per
// (mechanism, wave size), and win matrices over the fifteen base/hybrid cells.

#include <adaptexp/harness.hpp>
#include <adaptexp/losses.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace adaptexp {

inline constexpr double kZ95 = 1.96;

/// Mean with a normal-approximation 95% half-width.
struct MeanCI {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;

  double lower() const noexcept { return mean - half_width; }
  double upper() const noexcept { return mean + half_width; }
  bool disjoint_from(const MeanCI& other) const noexcept {
    return upper() < other.lower() || other.upper() < lower();
  }
};

/// mean +/- 1.96 s / sqrt(n) with s the sample standard deviation. A single
/// value gets a zero half-width.
inline MeanCI mean_ci(std::span<const double> values) {
  if (values.empty()) throw ContractError("mean_ci needs at least one value");
  MeanCI out;
  out.n = values.size();
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double s = std::sqrt(ss / (n - 1.0));
    out.half_width = kZ95 * s / std::sqrt(n);
  }
  return out;
}

struct MeanRow {
  BaseMeasure measure;
  Mechanism mechanism;
  std::int64_t wave_size;
  MeanCI ci;
};

struct AggregateResult {
  std::vector<MeanRow> rows;
  std::vector<std::string> warnings;
};

/// Groups by (mechanism, wave size) in canonical order. Values are summed in
/// (trial, mechanism, wave_size) order so the result does not depend on record order.
inline AggregateResult aggregate_means(const std::vector<TrialRecord>& records,
                                       BaseMeasure measure) {
  std::map<std::pair<Mechanism, std::int64_t>, std::vector<std::pair<std::int64_t, double>>> groups;
  for (const auto& r : records) {
    groups[{r.mechanism, r.wave_size}].emplace_back(r.trial, r.losses.get(measure));
  }
  AggregateResult out;
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    std::vector<double> v(values.size());
    std::transform(values.begin(), values.end(), v.begin(), [](const auto& p) { return p.second; });
    if (v.size() < 2) {
      out.warnings.push_back(std::string(measure_name(measure)) + "/" +
                             std::string(mechanism_name(key.first)) + "/" +
                             std::to_string(key.second) + ": single record, interval is zero");
    }
    out.rows.push_back({measure, key.first, key.second, mean_ci(v)});
  }
  // Canonical mechanisms that never appear at a wave size present elsewhere are empty groups.
  std::set<std::int64_t> sizes;
  std::set<Mechanism> mechs;
  for (const auto& [key, _] : groups) {
    sizes.insert(key.second);
    mechs.insert(key.first);
  }
  for (auto m : mechs) {
    for (auto w : sizes) {
      if (!groups.contains({m, w})) {
        out.warnings.push_back(std::string(measure_name(measure)) + "/" +
                               std::string(mechanism_name(m)) + "/" + std::to_string(w) +
                               ": empty group omitted");
      }
    }
  }
  return out;
}

enum class WinMode : std::uint8_t { per_trial, avg };

inline std::string_view win_mode_name(WinMode m) { return m == WinMode::per_trial ? "per-trial" : "avg"; }

/// One cell of a win matrix. In per-trial mode `values` holds win shares per
/// mechanism id; in avg mode it holds mean losses. Absent mechanisms read 0.
struct WinCell {
  HybridSpec spec;
  std::int64_t wave_size = 0;
  WinMode mode = WinMode::per_trial;
  Mechanism winner = Mechanism::ra;
  bool winner_tied = false;
  std::array<double, 4> values{};
  std::size_t trials = 0;
};

struct WinMatrix {
  std::int64_t wave_size = 0;
  WinMode mode = WinMode::per_trial;
  std::vector<WinCell> cells;  // in all_cells() order
  std::vector<Mechanism> mechanisms;
  std::size_t trials_used = 0;
  std::size_t trials_excluded = 0;
};

/// Loss vectors of one trial indexed by mechanism id.
struct TrialLosses {
  std::int64_t trial = 0;
  std::array<LossVector, 4> by_mechanism{};
};

struct PairedTrials {
  std::vector<Mechanism> mechanisms;
  std::vector<TrialLosses> trials;
  std::size_t excluded = 0;
};

/// Trials at `wave_size` that carry a record for every mechanism seen there.
inline PairedTrials paired_trials(const std::vector<TrialRecord>& records, std::int64_t wave_size) {
  std::set<Mechanism> mechs;
  std::map<std::int64_t, std::map<Mechanism, LossVector>> by_trial;
  for (const auto& r : records) {
    if (r.wave_size != wave_size) continue;
    mechs.insert(r.mechanism);
    by_trial[r.trial][r.mechanism] = r.losses;
  }
  PairedTrials out;
  out.mechanisms.assign(mechs.begin(), mechs.end());
  for (const auto& [trial, losses] : by_trial) {
    if (losses.size() != mechs.size()) {
      ++out.excluded;
      continue;
    }
    TrialLosses t;
    t.trial = trial;
    for (const auto& [m, lv] : losses) t.by_mechanism[mechanism_id(m)] = lv;
    out.trials.push_back(t);
  }
  return out;
}

/// Win shares from per-trial losses, `losses[trial][mechanism slot]`. Exact
/// ties split the trial evenly. Shares are accumulated as integers in units of
/// 1/12 of a trial, which is exact for up to four tied mechanisms.
inline std::vector<double> win_shares(const std::vector<std::vector<double>>& losses) {
  if (losses.empty()) return {};
  const std::size_t mechs = losses.front().size();
  constexpr std::int64_t unit = 12;
  std::vector<std::int64_t> units(mechs, 0);
  for (const auto& row : losses) {
    const double best = *std::min_element(row.begin(), row.end());
    std::int64_t tied = 0;
    for (double v : row) tied += v == best ? 1 : 0;
    if (unit % tied != 0) throw ContractError("win_shares supports at most four mechanisms");
    for (std::size_t m = 0; m < mechs; ++m) {
      if (row[m] == best) units[m] += unit / tied;
    }
  }
  std::vector<double> out(mechs);
  const double denom = static_cast<double>(unit) * static_cast<double>(losses.size());
  for (std::size_t m = 0; m < mechs; ++m) out[m] = static_cast<double>(units[m]) / denom;
  return out;
}

/// Per cell and trial, the mechanism with the lowest loss wins that trial.
inline WinMatrix win_matrix_per_trial(const std::vector<TrialRecord>& records, std::int64_t wave_size) {
  const auto paired = paired_trials(records, wave_size);
  WinMatrix out;
  out.wave_size = wave_size;
  out.mode = WinMode::per_trial;
  out.mechanisms = paired.mechanisms;
  out.trials_used = paired.trials.size();
  out.trials_excluded = paired.excluded;
  for (const auto& spec : all_cells()) {
    WinCell cell;
    cell.spec = spec;
    cell.wave_size = wave_size;
    cell.mode = WinMode::per_trial;
    cell.trials = paired.trials.size();
    if (!paired.trials.empty()) {
      std::vector<std::vector<double>> losses;
      losses.reserve(paired.trials.size());
      for (const auto& t : paired.trials) {
        std::vector<double> row;
        for (auto m : paired.mechanisms) {
          row.push_back(hybrid_loss(spec, t.by_mechanism[mechanism_id(m)]));
        }
        losses.push_back(std::move(row));
      }
      const auto shares = win_shares(losses);
      std::size_t best = 0;
      for (std::size_t i = 0; i < shares.size(); ++i) {
        cell.values[mechanism_id(paired.mechanisms[i])] = shares[i];
        if (shares[i] > shares[best]) best = i;
      }
      cell.winner = paired.mechanisms[best];
      cell.winner_tied = std::count(shares.begin(), shares.end(), shares[best]) > 1;
    }
    out.cells.push_back(cell);
  }
  return out;
}

/// Per cell, the mechanism with the lowest mean loss across trials wins
/// (lowest mechanism id on exact ties, flagged).
inline WinMatrix win_matrix_avg(const std::vector<TrialRecord>& records, std::int64_t wave_size) {
  const auto paired = paired_trials(records, wave_size);
  WinMatrix out;
  out.wave_size = wave_size;
  out.mode = WinMode::avg;
  out.mechanisms = paired.mechanisms;
  out.trials_used = paired.trials.size();
  out.trials_excluded = paired.excluded;
  for (const auto& spec : all_cells()) {
    WinCell cell;
    cell.spec = spec;
    cell.wave_size = wave_size;
    cell.mode = WinMode::avg;
    cell.trials = paired.trials.size();
    if (!paired.trials.empty()) {
      std::vector<double> means;
      for (auto m : paired.mechanisms) {
        double sum = 0.0;
        for (const auto& t : paired.trials) sum += hybrid_loss(spec, t.by_mechanism[mechanism_id(m)]);
        means.push_back(sum / static_cast<double>(paired.trials.size()));
      }
      std::size_t best = 0;
      for (std::size_t i = 0; i < means.size(); ++i) {
        cell.values[mechanism_id(paired.mechanisms[i])] = means[i];
        if (means[i] < means[best]) best = i;
      }
      cell.winner = paired.mechanisms[best];
      cell.winner_tied = std::count(means.begin(), means.end(), means[best]) > 1;
    }
    out.cells.push_back(cell);
  }
  return out;
}

inline std::vector<std::int64_t> wave_sizes_in(const std::vector<TrialRecord>& records) {
  std::set<std::int64_t> sizes;
  for (const auto& r : records) sizes.insert(r.wave_size);
  return {sizes.begin(), sizes.end()};
}

// CSV output. Doubles are written with round-trip precision.

inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_aggregate_header(std::ostream& out) {
  out << "measure,mechanism,wave_size,mean,ci_half_width,n\n";
}

inline void write_aggregate_rows(std::ostream& out, const std::vector<MeanRow>& rows) {
  for (const auto& r : rows) {
    out << measure_name(r.measure) << ',' << mechanism_name(r.mechanism) << ',' << r.wave_size
        << ',' << csv_number(r.ci.mean) << ',' << csv_number(r.ci.half_width) << ',' << r.ci.n
        << '\n';
  }
}

inline void write_winmatrix_header(std::ostream& out) {
  out << "measure_a,measure_b,wave_size,winner,prop_ra,prop_thompson,prop_exploration,"
         "prop_tempered,mode\n";
}

inline void write_winmatrix_rows(std::ostream& out, const WinMatrix& wm) {
  for (const auto& c : wm.cells) {
    out << measure_name(c.spec.a) << ',' << measure_name(c.spec.b) << ',' << c.wave_size << ','
        << mechanism_name(c.winner);
    for (double v : c.values) out << ',' << csv_number(v);
    out << ',' << win_mode_name(c.mode) << '\n';
  }
}

}  // namespace adaptexp
