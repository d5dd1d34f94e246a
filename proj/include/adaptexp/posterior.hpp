#pragma once

// Beta-Bernoulli conjugate inference.
//
// Probability-of-best comes in two flavours: a Monte Carlo estimator used on
// the simulation hot path, and a Gauss-Legendre quadrature used only to check
// it.

#include <adaptexp/types.hpp>

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

namespace adaptexp {

inline void check_state(const PosteriorState& state) {
  if (state.size() < 2) throw ContractError("posterior state needs at least two arms");
  for (const auto& arm : state.arms) {
    if (!arm.valid()) throw ContractError("Beta shape parameters must be positive");
  }
}

inline PosteriorState update(PosteriorState state, const OutcomeCounts& counts) {
  if (counts.successes.size() != state.size() || counts.failures.size() != state.size()) {
    throw ContractError("outcome counts length does not match the number of arms");
  }
  for (std::size_t k = 0; k < state.size(); ++k) {
    if (counts.successes[k] < 0 || counts.failures[k] < 0) {
      throw ContractError("outcome counts must be non-negative");
    }
    state[k].alpha += static_cast<double>(counts.successes[k]);
    state[k].beta += static_cast<double>(counts.failures[k]);
  }
  return state;
}

inline double posterior_mean(const BetaParams& p) { return p.alpha / (p.alpha + p.beta); }

inline double posterior_variance(const BetaParams& p) {
  const double s = p.alpha + p.beta;
  return p.alpha * p.beta / (s * s * (s + 1.0));
}

/// Root of the posterior-expected squared error to `theta_star`:
/// sqrt((theta_star - mean)^2 + variance).
inline double rmse(const BetaParams& p, double theta_star) {
  const double bias = theta_star - posterior_mean(p);
  return std::sqrt(bias * bias + posterior_variance(p));
}

/// Draws Beta(alpha, beta) variates as X / (X + Y) with X, Y independent Gammas.
class BetaSampler {
 public:
  explicit BetaSampler(const BetaParams& p) : x_(p.alpha, 1.0), y_(p.beta, 1.0) {}

  template <class Engine>
  double operator()(Engine& rng) {
    const double x = x_(rng);
    const double y = y_(rng);
    const double s = x + y;
    // Both gammas underflow only for tiny shapes; the ratio is then decided by the larger shape.
    if (s == 0.0) return x_.alpha() >= y_.alpha() ? 1.0 : 0.0;
    return x / s;
  }

 private:
  std::gamma_distribution<double> x_;
  std::gamma_distribution<double> y_;
};

template <class Engine>
std::vector<double> sample_posterior(const BetaParams& p, Engine& rng, std::size_t m) {
  if (m == 0) throw ContractError("sample_posterior needs m >= 1");
  if (!p.valid()) throw ContractError("Beta shape parameters must be positive");
  BetaSampler draw(p);
  std::vector<double> out(m);
  for (auto& v : out) v = draw(rng);
  return out;
}

/// Monte Carlo P(arm k is best). Arm k consumes only `arm_streams[k]`, so
/// permuting arms together with their streams permutes the output exactly.
/// Exact ties in a joint draw go to the lowest index.
template <class Engine>
AssignmentProbs prob_best_mc(const PosteriorState& state, std::size_t m,
                             std::span<Engine> arm_streams) {
  check_state(state);
  if (m == 0) throw ContractError("prob_best_mc needs m >= 1");
  if (arm_streams.size() != state.size()) {
    throw ContractError("prob_best_mc needs one stream per arm");
  }
  const std::size_t k = state.size();
  std::vector<BetaSampler> samplers;
  samplers.reserve(k);
  for (const auto& arm : state.arms) samplers.emplace_back(arm);

  std::vector<std::uint64_t> wins(k, 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    double best_value = samplers[0](arm_streams[0]);
    for (std::size_t a = 1; a < k; ++a) {
      const double v = samplers[a](arm_streams[a]);
      if (v > best_value) {
        best_value = v;
        best = a;
      }
    }
    ++wins[best];
  }
  AssignmentProbs out{std::vector<double>(k)};
  for (std::size_t a = 0; a < k; ++a) {
    out[a] = static_cast<double>(wins[a]) / static_cast<double>(m);
  }
  return out;
}

/// Seeds one child engine per arm slot from `rng` and runs the per-arm estimator.
inline AssignmentProbs prob_best_mc(const PosteriorState& state, std::size_t m, Rng& rng) {
  std::vector<Rng> streams;
  streams.reserve(state.size());
  for (std::size_t a = 0; a < state.size(); ++a) streams.emplace_back(rng());
  return prob_best_mc(state, m, std::span<Rng>(streams));
}

/// Regularized incomplete beta function I_x(a, b), i.e. the Beta(a, b) CDF at x.
inline double reg_inc_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0)) throw ContractError("reg_inc_beta needs x in [0, 1]");
  if (!(a > 0.0 && b > 0.0)) throw ContractError("reg_inc_beta needs positive shapes");
  return boost::math::ibeta(a, b, x);
}

/// Nodes and weights of an n-point Gauss-Legendre rule mapped onto [0, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline QuadratureRule gauss_legendre_unit(std::size_t n) {
  if (n == 0) throw ContractError("quadrature needs at least one node");
  QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Tricomi's initial guess for the i-th root, then Newton on P_n.
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        const auto jd = static_cast<double>(j);
        p0 = ((2.0 * jd - 1.0) * z * p1 - (jd - 1.0) * p2) / jd;
      }
      dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // Map [-1, 1] onto [0, 1]; roots come out in descending order.
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

inline constexpr std::size_t kDefaultQuadratureNodes = 256;
inline constexpr std::size_t kMinQuadratureNodes = 64;
inline constexpr double kMaxRenormalization = 1e-6;

/// P(arm k is best) as the integral over [0, 1] of f_k(x) * prod_{j != k} F_j(x).
/// The Gauss-Legendre rule runs in u with x = (1 - cos(pi u)) / 2: for shapes
/// in (1, 2) the density has an x^0.3-style kink at an endpoint, and plain
/// 256-node GL in x then misses unit mass by up to ~1e-4.
/// Throws NumericRangeError when the integrand is not finite or the raw
/// components miss unit mass by kMaxRenormalization or more.
inline AssignmentProbs prob_best_quadrature(const PosteriorState& state,
                                            std::size_t nodes = kDefaultQuadratureNodes) {
  check_state(state);
  if (nodes < kMinQuadratureNodes) {
    throw ContractError("prob_best_quadrature needs at least " +
                        std::to_string(kMinQuadratureNodes) + " nodes, got " +
                        std::to_string(nodes));
  }
  const auto rule = gauss_legendre_unit(nodes);
  const std::size_t k = state.size();
  AssignmentProbs out{std::vector<double>(k, 0.0)};
  std::vector<double> pdf(k);
  std::vector<double> cdf(k);
  try {
    for (std::size_t i = 0; i < nodes; ++i) {
      const double u = std::numbers::pi * rule.nodes[i];
      const double x = 0.5 * (1.0 - std::cos(u));
      const double w = rule.weights[i] * 0.5 * std::numbers::pi * std::sin(u);
      for (std::size_t a = 0; a < k; ++a) {
        pdf[a] = boost::math::ibeta_derivative(state[a].alpha, state[a].beta, x);
        cdf[a] = boost::math::ibeta(state[a].alpha, state[a].beta, x);
      }
      for (std::size_t a = 0; a < k; ++a) {
        double v = pdf[a];
        for (std::size_t j = 0; j < k; ++j) {
          if (j != a) v *= cdf[j];
        }
        if (!std::isfinite(v)) throw NumericRangeError("non-finite quadrature integrand");
        out[a] += w * v;
      }
    }
  } catch (const NumericRangeError&) {
    throw;
  } catch (const std::exception& e) {
    // Boost.Math reports overflow and evaluation failures through its own exceptions.
    throw NumericRangeError(std::string("quadrature failed: ") + e.what());
  }
  double sum = 0.0;
  for (double v : out.probs) sum += v;
  const double correction = std::abs(sum - 1.0);
  if (!std::isfinite(sum) || correction >= kMaxRenormalization) {
    std::ostringstream msg;
    msg << "quadrature mass " << sum << " is too far from 1 (correction " << correction << ")";
    throw NumericRangeError(msg.str());
  }
  for (double& v : out.probs) v /= sum;
  return out;
}

}  // namespace adaptexp
