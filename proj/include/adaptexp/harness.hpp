#pragma once

// Single experiments and full replication studies.
//
// All randomness is keyed to study coordinates: the truth for trial i comes
// from a stream keyed by (master_seed, i), and each (trial, mechanism,
// wave_size) cell gets its own stream. Records therefore depend only on the
// configuration, never on scheduling.

#include <adaptexp/losses.hpp>
#include <adaptexp/mechanisms.hpp>
#include <adaptexp/posterior.hpp>
#include <adaptexp/types.hpp>

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

namespace adaptexp {

struct ExperimentConfig {
  std::int64_t k_arms = 3;
  std::int64_t n_total = 1000;
  std::vector<std::int64_t> wave_sizes = {4, 10, 100};
  std::vector<Mechanism> mechanisms = {kAllMechanisms.begin(), kAllMechanisms.end()};
  double gamma = kDefaultGamma;
  BetaParams prior = {1.0, 1.0};
  std::int64_t replications = 10'000;
  std::int64_t mc_draws = 1000;
  std::int64_t sp_draws = static_cast<std::int64_t>(kDefaultSpDraws);
  double alpha = kDefaultAlpha;
  AllocationPolicy allocation_policy = AllocationPolicy::iid;
  std::uint64_t master_seed = 20'220'601;

  MechanismKind kind(Mechanism m) const { return MechanismKind::of(m, gamma); }

  std::int64_t waves(std::int64_t wave_size) const { return n_total / wave_size; }

  /// Throws ConfigError naming the first offending field.
  void validate() const {
    if (k_arms < 2) throw ConfigError("k_arms", "must be at least 2");
    if (n_total < 1) throw ConfigError("n_total", "must be positive");
    if (wave_sizes.empty()) throw ConfigError("wave_sizes", "must not be empty");
    std::set<std::int64_t> seen_sizes;
    for (auto w : wave_sizes) {
      if (w < 1) throw ConfigError("wave_sizes", "entries must be positive");
      if (n_total % w != 0) {
        throw ConfigError("wave_sizes", "n_total " + std::to_string(n_total) +
                                            " is not divisible by wave size " + std::to_string(w));
      }
      if (!seen_sizes.insert(w).second) {
        throw ConfigError("wave_sizes", "duplicate wave size " + std::to_string(w));
      }
    }
    if (mechanisms.empty()) throw ConfigError("mechanisms", "must not be empty");
    std::set<Mechanism> seen;
    for (auto m : mechanisms) {
      if (!seen.insert(m).second) {
        throw ConfigError("mechanisms", "duplicate mechanism " + std::string(mechanism_name(m)));
      }
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "must lie in [0, 1]");
    if (!prior.valid()) throw ConfigError("prior", "shape parameters must be positive");
    if (replications < 1) throw ConfigError("replications", "must be at least 1");
    if (mc_draws < 1) throw ConfigError("mc_draws", "must be at least 1");
    if (sp_draws < 1) throw ConfigError("sp_draws", "must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
  }
};

/// One (mechanism, wave size) pairing run against every truth set.
struct Cell {
  Mechanism mechanism;
  std::int64_t wave_size;
};

/// Cells in canonical order: mechanism id, then ascending wave size.
inline std::vector<Cell> study_cells(const ExperimentConfig& config) {
  auto mechs = config.mechanisms;
  auto sizes = config.wave_sizes;
  std::sort(mechs.begin(), mechs.end());
  std::sort(sizes.begin(), sizes.end());
  std::vector<Cell> cells;
  for (auto m : mechs) {
    for (auto w : sizes) cells.push_back({m, w});
  }
  return cells;
}

struct TieFlags {
  bool k_hat = false;  // several arms share the top posterior mean
  bool truth = false;  // the true rates are not all distinct
  friend bool operator==(const TieFlags&, const TieFlags&) = default;
};

struct TrialRecord {
  std::int64_t trial = 0;
  Mechanism mechanism = Mechanism::ra;
  std::int64_t wave_size = 0;
  TruthSet truth;
  LossVector losses;
  PosteriorState final_posteriors;
  std::vector<std::int64_t> counts;
  TieFlags tie_flags;
  std::uint64_t seed = 0;
  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

// splitmix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kCellStreamTag = 0x63656c6c2d737472ULL;   // "cell-str"
inline constexpr std::uint64_t kTruthStreamTag = 0x7472757468737472ULL;  // "truthstr"

/// Seed of the outcome stream for one study cell:
/// mix64(mix64(mix64(mix64(master ^ tag) ^ trial) ^ mechanism_id) ^ wave_size).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial,
                                           std::uint64_t mechanism_id,
                                           std::uint64_t wave_size) noexcept {
  std::uint64_t h = mix64(master ^ kCellStreamTag);
  h = mix64(h ^ trial);
  h = mix64(h ^ mechanism_id);
  return mix64(h ^ wave_size);
}

/// Seed of the truth stream for one trial; shared by every cell of that trial.
inline constexpr std::uint64_t truth_seed(std::uint64_t master, std::uint64_t trial) noexcept {
  return mix64(mix64(master ^ kTruthStreamTag) ^ trial);
}

/// k_arms independent standard-uniform rates.
inline TruthSet draw_truth(const ExperimentConfig& config, std::int64_t trial) {
  Rng rng(truth_seed(config.master_seed, static_cast<std::uint64_t>(trial)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TruthSet truth{std::vector<double>(static_cast<std::size_t>(config.k_arms))};
  for (auto& t : truth.theta_star) t = unit(rng);
  return truth;
}

/// Runs one adaptive experiment from the prior through n_total / wave_size waves
/// and scores it. Deterministic in (config, cell, truth, seed).
inline TrialRecord run_experiment(const ExperimentConfig& config, const Cell& cell,
                                  const TruthSet& truth, std::uint64_t seed) {
  config.validate();
  if (cell.wave_size < 1 || config.n_total % cell.wave_size != 0) {
    throw ConfigError("wave_sizes", "n_total is not divisible by wave size " +
                                        std::to_string(cell.wave_size));
  }
  const auto k = static_cast<std::size_t>(config.k_arms);
  if (truth.size() != k) throw ContractError("truth length does not match k_arms");
  for (double t : truth.theta_star) {
    if (!(t >= 0.0 && t <= 1.0)) throw ContractError("true rates must lie in [0, 1]");
  }

  Rng rng(seed);
  const auto kind = config.kind(cell.mechanism);
  auto state = PosteriorState::uniform(k, config.prior);
  std::vector<std::int64_t> totals(k, 0);
  const std::int64_t waves = config.waves(cell.wave_size);

  for (std::int64_t t = 0; t < waves; ++t) {
    const auto probs =
        assignment_probs(kind, state, static_cast<std::size_t>(config.mc_draws), rng);
    const auto alloc = allocate(probs, cell.wave_size, config.allocation_policy, rng);
    auto outcomes = OutcomeCounts::zeros(k);
    for (std::size_t a = 0; a < k; ++a) {
      std::bernoulli_distribution outcome(truth[a]);
      for (std::int64_t i = 0; i < alloc.counts[a]; ++i) {
        if (outcome(rng)) {
          ++outcomes.successes[a];
        } else {
          ++outcomes.failures[a];
        }
      }
      totals[a] += alloc.counts[a];
    }
    state = update(std::move(state), outcomes);
  }

  TrialRecord rec;
  rec.mechanism = cell.mechanism;
  rec.wave_size = cell.wave_size;
  rec.truth = truth;
  rec.seed = seed;
  rec.losses.r_sample = in_sample_regret(truth, std::span<const std::int64_t>(totals));
  rec.losses.r_policy = policy_regret(truth, state);
  const auto prec = precision_losses(truth, state);
  rec.losses.prec_best = prec.prec_best;
  rec.losses.prec_avg = prec.prec_avg;
  rec.losses.sp = statistical_power_loss(truth, state, config.alpha,
                                         static_cast<std::size_t>(config.sp_draws), rng);
  rec.tie_flags.k_hat = estimated_best(state).tied;
  rec.tie_flags.truth = truth_has_ties(truth);
  rec.final_posteriors = std::move(state);
  rec.counts = std::move(totals);
  return rec;
}

/// Every cell of one trial, sharing a single truth draw.
inline std::vector<TrialRecord> run_trial(const ExperimentConfig& config, std::int64_t trial) {
  const auto truth = draw_truth(config, trial);
  std::vector<TrialRecord> out;
  for (const auto& cell : study_cells(config)) {
    const auto seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(trial),
                                  mechanism_id(cell.mechanism),
                                  static_cast<std::uint64_t>(cell.wave_size));
    auto rec = run_experiment(config, cell, truth, seed);
    rec.trial = trial;
    out.push_back(std::move(rec));
  }
  return out;
}

using RecordSink = std::function<void(const TrialRecord&)>;

inline unsigned default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Runs every trial of the study and hands records to `sink` in
/// (trial, mechanism, wave_size) order whatever the thread count. Trials run
/// concurrently; the sink is only ever called under a lock. An exception from
/// the sink or a worker stops the study and is rethrown; records already
/// delivered stay delivered. Returns the number of records emitted.
inline std::size_t run_study(const ExperimentConfig& config, const RecordSink& sink,
                             unsigned threads = default_threads()) {
  config.validate();
  threads = std::max(1u, threads);
  const std::int64_t trials = config.replications;
  // Finished trials waiting for an earlier straggler are held in memory; cap that backlog.
  const std::int64_t window = 4 * static_cast<std::int64_t>(threads);

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::int64_t, std::vector<TrialRecord>> pending;
  std::int64_t next_emit = 0;
  std::int64_t next_claim = 0;
  std::size_t emitted = 0;
  std::exception_ptr failure;
  bool stop = false;

  auto worker = [&] {
    while (true) {
      std::int64_t trial = 0;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return stop || next_claim >= trials || next_claim < next_emit + window; });
        if (stop || next_claim >= trials) return;
        trial = next_claim++;
      }
      std::vector<TrialRecord> records;
      try {
        records = run_trial(config, trial);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        stop = true;
        cv.notify_all();
        return;
      }
      std::lock_guard lock(mu);
      if (stop) return;
      pending.emplace(trial, std::move(records));
      try {
        for (auto it = pending.find(next_emit); it != pending.end(); it = pending.find(next_emit)) {
          for (const auto& rec : it->second) {
            sink(rec);
            ++emitted;
          }
          pending.erase(it);
          ++next_emit;
        }
      } catch (...) {
        if (!failure) failure = std::current_exception();
        stop = true;
      }
      cv.notify_all();
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return emitted;
}

}  // namespace adaptexp
