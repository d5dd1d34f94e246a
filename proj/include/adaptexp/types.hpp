#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaptexp {

/// Engine used everywhere randomness is consumed. Every concurrent task owns one.
using Rng = std::mt19937_64;

/// Raised when a caller breaks an operation's preconditions.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation leaves the representable range (extreme shape parameters).
class NumericRangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Invalid experiment configuration. `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Shape parameters of a Beta distribution over one arm's success rate.
struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;

  bool valid() const noexcept { return alpha > 0.0 && beta > 0.0; }
  friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

/// Independent Beta posteriors, one per arm, in a fixed arm order.
struct PosteriorState {
  std::vector<BetaParams> arms;

  static PosteriorState uniform(std::size_t k, BetaParams prior = {}) {
    return PosteriorState{std::vector<BetaParams>(k, prior)};
  }
  std::size_t size() const noexcept { return arms.size(); }
  const BetaParams& operator[](std::size_t k) const { return arms[k]; }
  BetaParams& operator[](std::size_t k) { return arms[k]; }
  friend bool operator==(const PosteriorState&, const PosteriorState&) = default;
};

/// Successes and failures observed per arm during one wave.
struct OutcomeCounts {
  std::vector<std::int64_t> successes;
  std::vector<std::int64_t> failures;

  static OutcomeCounts zeros(std::size_t k) {
    return OutcomeCounts{std::vector<std::int64_t>(k, 0), std::vector<std::int64_t>(k, 0)};
  }
  std::int64_t total() const noexcept {
    std::int64_t n = 0;
    for (auto s : successes) n += s;
    for (auto f : failures) n += f;
    return n;
  }
};

/// Probability vector over arms. Lies on the simplex.
struct AssignmentProbs {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t k) const { return probs[k]; }
  double& operator[](std::size_t k) { return probs[k]; }

  bool on_simplex(double tol = 1e-9) const noexcept {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0 && p <= 1.0)) return false;
      sum += p;
    }
    return sum > 1.0 - tol && sum < 1.0 + tol;
  }
  friend bool operator==(const AssignmentProbs&, const AssignmentProbs&) = default;
};

/// Per-arm participant counts for one wave.
struct WaveAllocation {
  std::vector<std::int64_t> counts;

  std::int64_t total() const noexcept {
    std::int64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
  friend bool operator==(const WaveAllocation&, const WaveAllocation&) = default;
};

/// Index of a maximal element with the lowest-index tie rule, plus whether a tie occurred.
struct ArgmaxResult {
  std::size_t index = 0;
  bool tied = false;
};

template <class Range>
ArgmaxResult argmax_lowest(const Range& values) {
  ArgmaxResult r;
  bool first = true;
  double best = 0.0;
  std::size_t i = 0;
  for (double v : values) {
    if (first || v > best) {
      best = v;
      r.index = i;
      r.tied = false;
      first = false;
    } else if (v == best) {
      r.tied = true;
    }
    ++i;
  }
  return r;
}

}  // namespace adaptexp
