// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "tcrm/error.hpp"
#include "tcrm/special_functions.hpp"

namespace tcrm {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// xoshiro256** generator keyed by a (seed, stream) pair.
///
/// Streams with distinct keys are statistically independent, so per-atom or
/// per-document substreams give draws that do not depend on visiting order.
/// Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t x = seed;
    std::uint64_t key = detail::splitmix64(x);
    std::uint64_t y = stream ^ 0x6a09e667f3bcc909ULL;
    key ^= detail::splitmix64(y);
    for (auto& word : state_) word = detail::splitmix64(key);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t state_[4];
};

/// A family of independent generators derived from one draw of a parent.
class RngStreams {
 public:
  explicit RngStreams(Rng& parent) : base_(parent()) {}
  Rng at(std::uint64_t key) const { return Rng(base_, key); }

 private:
  std::uint64_t base_;
};

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform on the open interval (0, 1).
inline double open_uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

inline double standard_normal(Rng& rng) {
  const double u1 = open_uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(Rng& rng, double mean, double sd) { return mean + sd * standard_normal(rng); }

/// log of a Ga(shape, 1) draw. Small shapes are handled in the log domain,
/// so the result stays finite even when the variate itself underflows.
inline double log_gamma_variate(Rng& rng, double shape) {
  if (!(shape > 0.0)) throw ParameterError("gamma shape must be positive");
  if (shape < 1.0) {
    return log_gamma_variate(rng, shape + 1.0) + std::log(open_uniform01(rng)) / shape;
  }
  // Marsaglia & Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = open_uniform01(rng);
    const double log_v = std::log(v);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * log_v) return std::log(d) + log_v;
  }
}

/// Ga(shape, rate) draw, floored at the smallest normal double so it is
/// strictly positive.
inline double gamma(Rng& rng, double shape, double rate) {
  if (!(rate > 0.0)) throw ParameterError("gamma rate must be positive");
  const double x = std::exp(log_gamma_variate(rng, shape) - std::log(rate));
  return std::max(x, std::numeric_limits<double>::min());
}

/// Be(a, b) draw, strictly inside (0, 1).
inline double beta(Rng& rng, double a, double b) {
  const double la = log_gamma_variate(rng, a);
  const double lb = log_gamma_variate(rng, b);
  const double x = std::exp(la - log_sum_exp(la, lb));
  return std::clamp(x, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

/// Inverse-gamma draw with the given shape and scale.
inline double inverse_gamma(Rng& rng, double shape, double scale) {
  return 1.0 / gamma(rng, shape, scale);
}

/// Dirichlet draw into `out`. Components are floored at the smallest normal
/// double; the vector still sums to one within rounding.
inline void dirichlet(Rng& rng, std::span<const double> alpha, std::span<double> out) {
  detail::require_same_size(alpha.size(), out.size(), "dirichlet");
  for (std::size_t i = 0; i < alpha.size(); ++i) out[i] = log_gamma_variate(rng, alpha[i]);
  const double norm = log_sum_exp(std::span<const double>(out.data(), out.size()));
  for (auto& v : out) v = std::max(std::exp(v - norm), std::numeric_limits<double>::min());
}

inline std::uint64_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<std::uint64_t>(mean)(rng);
}

inline std::uint64_t binomial(Rng& rng, std::uint64_t n, double p) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::uint64_t>(n, p)(rng);
}

/// Multinomial(n; weights / sum(weights)) by sequential conditional binomials.
/// Zero-weight categories always receive zero.
template <class Count>
void multinomial(Rng& rng, std::uint64_t n, std::span<const double> weights, std::span<Count> out) {
  detail::require_same_size(weights.size(), out.size(), "multinomial");
  double remaining_weight = 0.0;
  std::size_t last = weights.size();
  for (std::size_t k = 0; k < weights.size(); ++k) {
    remaining_weight += weights[k];
    if (weights[k] > 0.0) last = k;
  }
  for (auto& c : out) c = 0;
  if (n == 0) return;
  if (last == weights.size()) throw InvariantViolation("multinomial with all-zero weights");
  for (std::size_t k = 0; k < last && n > 0; ++k) {
    if (weights[k] <= 0.0) continue;
    const double p = std::min(1.0, weights[k] / remaining_weight);
    const std::uint64_t x = binomial(rng, n, p);
    out[k] = static_cast<Count>(x);
    n -= x;
    remaining_weight -= weights[k];
    if (!(remaining_weight > 0.0)) break;
  }
  out[last] += static_cast<Count>(n);
}

/// Sample an index with probability proportional to exp(log_weights).
inline std::size_t categorical_log(Rng& rng, std::span<const double> log_weights) {
  const double norm = log_sum_exp(log_weights);
  double u = uniform01(rng);
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    u -= std::exp(log_weights[i] - norm);
    if (u < 0.0) return i;
  }
  return log_weights.size() - 1;
}

/// Sample an index with probability proportional to nonnegative weights.
inline std::size_t categorical(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  return weights.size() - 1;
}

/// Uniform clamp applied before every inverse-CDF evaluation.
inline constexpr double kInverseCdfEpsilon = 1e-12;

/// N(mean, 1) restricted to (0, inf), drawn by inversion.
inline double truncated_normal_positive(Rng& rng, double mean) {
  const double u = std::clamp(uniform01(rng), kInverseCdfEpsilon, 1.0 - kInverseCdfEpsilon);
  const double mass = normal_cdf(mean);
  if (mass < 1e-300) return -std::log(u) / -mean;  // exponential tail limit
  return mean - normal_quantile(u * mass);
}

/// N(mean, 1) restricted to (-inf, 0), drawn by inversion.
inline double truncated_normal_negative(Rng& rng, double mean) {
  return -truncated_normal_positive(rng, -mean);
}

}  // namespace tcrm
