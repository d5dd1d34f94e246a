#pragma once

// Assignment mechanisms: map the current posterior to per-arm assignment
// probabilities for the next wave, and turn those probabilities into counts.

#include <adaptexp/posterior.hpp>
#include <adaptexp/types.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>

namespace adaptexp {

enum class Mechanism : std::uint8_t { ra = 0, thompson = 1, exploration = 2, tempered = 3 };

inline constexpr std::array<Mechanism, 4> kAllMechanisms = {
    Mechanism::ra, Mechanism::thompson, Mechanism::exploration, Mechanism::tempered};

inline constexpr double kDefaultGamma = 0.2;

inline std::string_view mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::ra: return "ra";
    case Mechanism::thompson: return "thompson";
    case Mechanism::exploration: return "exploration";
    case Mechanism::tempered: return "tempered";
  }
  return "unknown";
}

inline std::optional<Mechanism> parse_mechanism(std::string_view name) {
  for (auto m : kAllMechanisms) {
    if (mechanism_name(m) == name) return m;
  }
  return std::nullopt;
}

inline std::size_t mechanism_id(Mechanism m) { return static_cast<std::size_t>(m); }

/// A mechanism tag with its mixing weight; `gamma` is set iff the tag is tempered.
class MechanismKind {
 public:
  static MechanismKind ra() { return MechanismKind(Mechanism::ra, std::nullopt); }
  static MechanismKind thompson() { return MechanismKind(Mechanism::thompson, std::nullopt); }
  static MechanismKind exploration() { return MechanismKind(Mechanism::exploration, std::nullopt); }
  static MechanismKind tempered(double gamma = kDefaultGamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("gamma must lie in [0, 1]");
    return MechanismKind(Mechanism::tempered, gamma);
  }
  static MechanismKind of(Mechanism tag, double gamma = kDefaultGamma) {
    return tag == Mechanism::tempered ? tempered(gamma) : MechanismKind(tag, std::nullopt);
  }

  Mechanism tag() const noexcept { return tag_; }
  std::optional<double> gamma() const noexcept { return gamma_; }
  bool adaptive() const noexcept { return tag_ != Mechanism::ra; }

  friend bool operator==(const MechanismKind&, const MechanismKind&) = default;

 private:
  MechanismKind(Mechanism tag, std::optional<double> gamma) : tag_(tag), gamma_(gamma) {}
  Mechanism tag_;
  std::optional<double> gamma_;
};

inline AssignmentProbs uniform_probs(std::size_t k) {
  return AssignmentProbs{std::vector<double>(k, 1.0 / static_cast<double>(k))};
}

inline constexpr double kExplorationDegenerate = 1e-12;

/// q_k = p_k (1 - p_k) / sum_j p_j (1 - p_j). A vanishing denominator means the
/// Thompson vector is already certain, and it is returned unchanged.
inline AssignmentProbs exploration_transform(const AssignmentProbs& thompson) {
  AssignmentProbs out{std::vector<double>(thompson.size())};
  double denom = 0.0;
  for (std::size_t k = 0; k < thompson.size(); ++k) {
    out[k] = thompson[k] * (1.0 - thompson[k]);
    denom += out[k];
  }
  if (denom < kExplorationDegenerate) return thompson;
  for (double& q : out.probs) q /= denom;
  return out;
}

/// (1 - gamma) p_k + gamma / K.
inline AssignmentProbs tempered_transform(const AssignmentProbs& thompson, double gamma) {
  const double share = gamma / static_cast<double>(thompson.size());
  AssignmentProbs out{std::vector<double>(thompson.size())};
  for (std::size_t k = 0; k < thompson.size(); ++k) {
    out[k] = (1.0 - gamma) * thompson[k] + share;
  }
  return out;
}

/// Per-wave assignment probabilities. RA ignores `state` and consumes no randomness.
inline AssignmentProbs assignment_probs(const MechanismKind& kind, const PosteriorState& state,
                                        std::size_t m, Rng& rng) {
  check_state(state);
  if (!kind.adaptive()) return uniform_probs(state.size());
  if (m == 0) throw ContractError("adaptive mechanisms need m >= 1");
  const auto thompson = prob_best_mc(state, m, rng);
  switch (kind.tag()) {
    case Mechanism::thompson: return thompson;
    case Mechanism::exploration: return exploration_transform(thompson);
    case Mechanism::tempered: return tempered_transform(thompson, *kind.gamma());
    case Mechanism::ra: break;
  }
  return uniform_probs(state.size());
}

enum class AllocationPolicy : std::uint8_t { iid, largest_remainder };

inline std::string_view allocation_policy_name(AllocationPolicy p) {
  return p == AllocationPolicy::iid ? "iid" : "largest-remainder";
}

inline std::optional<AllocationPolicy> parse_allocation_policy(std::string_view name) {
  if (name == "iid") return AllocationPolicy::iid;
  if (name == "largest-remainder") return AllocationPolicy::largest_remainder;
  return std::nullopt;
}

/// floor(n p_k) per arm, then the leftover participants one each to the largest
/// fractional parts (lowest index first on ties).
inline WaveAllocation allocate_largest_remainder(const AssignmentProbs& probs, std::int64_t n_t) {
  const std::size_t k = probs.size();
  WaveAllocation out{std::vector<std::int64_t>(k, 0)};
  std::vector<double> remainder(k);
  std::int64_t assigned = 0;
  for (std::size_t a = 0; a < k; ++a) {
    const double exact = static_cast<double>(n_t) * probs[a];
    const double whole = std::floor(exact);
    out.counts[a] = static_cast<std::int64_t>(whole);
    remainder[a] = exact - whole;
    assigned += out.counts[a];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return remainder[x] > remainder[y]; });
  // Rounding in n * p can leave the floors summing past n_t; trim from the smallest remainders.
  for (auto it = order.rbegin(); assigned > n_t && it != order.rend(); ++it) {
    if (out.counts[*it] > 0) {
      --out.counts[*it];
      --assigned;
    }
  }
  for (std::size_t i = 0; assigned < n_t; i = (i + 1) % k) {
    ++out.counts[order[i]];
    ++assigned;
  }
  return out;
}

template <class Engine>
WaveAllocation allocate_iid(const AssignmentProbs& probs, std::int64_t n_t, Engine& rng) {
  WaveAllocation out{std::vector<std::int64_t>(probs.size(), 0)};
  std::discrete_distribution<std::size_t> pick(probs.probs.begin(), probs.probs.end());
  for (std::int64_t i = 0; i < n_t; ++i) ++out.counts[pick(rng)];
  return out;
}

inline WaveAllocation allocate(const AssignmentProbs& probs, std::int64_t n_t,
                               AllocationPolicy policy, Rng& rng) {
  if (n_t < 1) throw ContractError("allocate needs n_t >= 1");
  if (probs.size() == 0) throw ContractError("allocate needs a non-empty probability vector");
  return policy == AllocationPolicy::iid ? allocate_iid(probs, n_t, rng)
                                         : allocate_largest_remainder(probs, n_t);
}

}  // namespace adaptexp
