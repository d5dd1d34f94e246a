#pragma once

// Base and hybrid loss measures for one completed experiment.

#include <adaptexp/posterior.hpp>
#include <adaptexp/types.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace adaptexp {

/// True success rates, one per arm.
struct TruthSet {
  std::vector<double> theta_star;

  std::size_t size() const noexcept { return theta_star.size(); }
  double operator[](std::size_t k) const { return theta_star[k]; }
  ArgmaxResult best() const { return argmax_lowest(theta_star); }
  friend bool operator==(const TruthSet&, const TruthSet&) = default;
};

enum class BaseMeasure : std::uint8_t { r_sample = 0, r_policy = 1, prec_best = 2, prec_avg = 3, sp = 4 };

inline constexpr std::array<BaseMeasure, 5> kAllMeasures = {
    BaseMeasure::r_sample, BaseMeasure::r_policy, BaseMeasure::prec_best, BaseMeasure::prec_avg,
    BaseMeasure::sp};

inline std::string_view measure_name(BaseMeasure m) {
  switch (m) {
    case BaseMeasure::r_sample: return "r_sample";
    case BaseMeasure::r_policy: return "r_policy";
    case BaseMeasure::prec_best: return "prec_best";
    case BaseMeasure::prec_avg: return "prec_avg";
    case BaseMeasure::sp: return "sp";
  }
  return "unknown";
}

inline std::optional<BaseMeasure> parse_measure(std::string_view name) {
  for (auto m : kAllMeasures) {
    if (measure_name(m) == name) return m;
  }
  return std::nullopt;
}

struct LossVector {
  double r_sample = 0.0;
  double r_policy = 0.0;
  double prec_best = 0.0;
  double prec_avg = 0.0;
  int sp = 0;

  double get(BaseMeasure m) const noexcept {
    switch (m) {
      case BaseMeasure::r_sample: return r_sample;
      case BaseMeasure::r_policy: return r_policy;
      case BaseMeasure::prec_best: return prec_best;
      case BaseMeasure::prec_avg: return prec_avg;
      case BaseMeasure::sp: return static_cast<double>(sp);
    }
    return 0.0;
  }

  bool in_range() const noexcept {
    for (auto m : kAllMeasures) {
      const double v = get(m);
      if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return sp == 0 || sp == 1;
  }
  friend bool operator==(const LossVector&, const LossVector&) = default;
};

/// A pair of base measures. `a == b` denotes the base measure itself (the
/// diagonal of a win matrix); otherwise the pair is unordered.
struct HybridSpec {
  BaseMeasure a;
  BaseMeasure b;

  bool diagonal() const noexcept { return a == b; }
  friend bool operator==(const HybridSpec&, const HybridSpec&) = default;
};

/// The ten off-diagonal pairs, in measure order.
inline std::vector<HybridSpec> all_hybrids() {
  std::vector<HybridSpec> out;
  for (std::size_t i = 0; i < kAllMeasures.size(); ++i) {
    for (std::size_t j = i + 1; j < kAllMeasures.size(); ++j) {
      out.push_back({kAllMeasures[i], kAllMeasures[j]});
    }
  }
  return out;
}

/// The fifteen win-matrix cells: each base measure on the diagonal followed by its pairs.
inline std::vector<HybridSpec> all_cells() {
  std::vector<HybridSpec> out;
  for (std::size_t i = 0; i < kAllMeasures.size(); ++i) {
    for (std::size_t j = i; j < kAllMeasures.size(); ++j) {
      out.push_back({kAllMeasures[i], kAllMeasures[j]});
    }
  }
  return out;
}

inline double regret_gap(const TruthSet& truth, std::size_t k) {
  if (k >= truth.size()) throw ContractError("arm index out of range");
  return truth[truth.best().index] - truth[k];
}

/// Mean per-participant regret over every wave of the experiment.
inline double in_sample_regret(const TruthSet& truth, std::span<const WaveAllocation> waves) {
  double weighted = 0.0;
  std::int64_t n = 0;
  for (const auto& wave : waves) {
    if (wave.counts.size() != truth.size()) {
      throw ContractError("wave allocation length does not match the number of arms");
    }
    for (std::size_t k = 0; k < truth.size(); ++k) {
      weighted += static_cast<double>(wave.counts[k]) * regret_gap(truth, k);
      n += wave.counts[k];
    }
  }
  if (n == 0) throw ContractError("in_sample_regret needs at least one participant");
  return weighted / static_cast<double>(n);
}

/// Same quantity from per-arm totals; the regret is linear in the counts.
inline double in_sample_regret(const TruthSet& truth, std::span<const std::int64_t> totals) {
  const WaveAllocation whole{std::vector<std::int64_t>(totals.begin(), totals.end())};
  return in_sample_regret(truth, std::span<const WaveAllocation>(&whole, 1));
}

/// Arm with the highest posterior mean (lowest index on exact ties).
inline ArgmaxResult estimated_best(const PosteriorState& final_state) {
  std::vector<double> means(final_state.size());
  std::transform(final_state.arms.begin(), final_state.arms.end(), means.begin(),
                 [](const BetaParams& p) { return posterior_mean(p); });
  return argmax_lowest(means);
}

inline void check_pair(const TruthSet& truth, const PosteriorState& final_state) {
  if (truth.size() != final_state.size()) {
    throw ContractError("truth and posterior have different numbers of arms");
  }
}

inline double policy_regret(const TruthSet& truth, const PosteriorState& final_state) {
  check_pair(truth, final_state);
  return regret_gap(truth, estimated_best(final_state).index);
}

struct PrecisionLosses {
  double prec_best = 0.0;
  double prec_avg = 0.0;
};

inline PrecisionLosses precision_losses(const TruthSet& truth, const PosteriorState& final_state) {
  check_pair(truth, final_state);
  const std::size_t k_hat = estimated_best(final_state).index;
  PrecisionLosses out;
  out.prec_best = rmse(final_state[k_hat], truth[k_hat]);
  double sum = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) sum += rmse(final_state[k], truth[k]);
  out.prec_avg = sum / static_cast<double>(truth.size());
  return out;
}

/// Arm indices sorted ascending by true rate; ties keep index order.
inline std::vector<std::size_t> true_rank_order(const TruthSet& truth) {
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return truth[x] < truth[y]; });
  return order;
}

inline bool truth_has_ties(const TruthSet& truth) {
  const auto order = true_rank_order(truth);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (truth[order[i]] == truth[order[i - 1]]) return true;
  }
  return false;
}

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr std::size_t kDefaultSpDraws = 10'000;

/// 0 when every adjacent pair in the true order is confirmed at level `alpha`,
/// 1 otherwise. The empirical p-value for (lo, hi) is the share of joint
/// posterior draws with draw_hi <= draw_lo; all pairs share one draw matrix.
inline int statistical_power_loss(const TruthSet& truth, const PosteriorState& final_state,
                                  double alpha, std::size_t m, Rng& rng) {
  check_pair(truth, final_state);
  check_state(final_state);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha must lie in (0, 1)");
  if (m == 0) throw ContractError("statistical_power_loss needs m >= 1");

  const auto order = true_rank_order(truth);
  const std::size_t k = truth.size();
  std::vector<BetaSampler> samplers;
  samplers.reserve(k);
  for (const auto& arm : final_state.arms) samplers.emplace_back(arm);

  std::vector<double> draw(k);
  std::vector<std::uint64_t> reversals(k - 1, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t a = 0; a < k; ++a) draw[a] = samplers[a](rng);
    for (std::size_t p = 0; p + 1 < k; ++p) {
      if (draw[order[p + 1]] <= draw[order[p]]) ++reversals[p];
    }
  }
  for (auto r : reversals) {
    const double p_value = static_cast<double>(r) / static_cast<double>(m);
    if (!(p_value < alpha)) return 1;
  }
  return 0;
}

/// Regret/precision pairs average; any pair with SP takes the maximum; a
/// diagonal spec is the base measure itself.
inline double hybrid_loss(const HybridSpec& spec, const LossVector& losses) {
  const double a = losses.get(spec.a);
  if (spec.diagonal()) return a;
  const double b = losses.get(spec.b);
  if (spec.a == BaseMeasure::sp || spec.b == BaseMeasure::sp) return std::max(a, b);
  return 0.5 * (a + b);
}

}  // namespace adaptexp
