// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tcrm/crm.hpp"
#include "tcrm/error.hpp"
#include "tcrm/random.hpp"
#include "tcrm/special_functions.hpp"

namespace tcrm {

// ---------------------------------------------------------------------------
// Covariate geometry

inline double squared_distance(double a, double b) { return (a - b) * (a - b); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  detail::require_same_size(a.size(), b.size(), "covariate dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  return squared_distance(std::span<const double>(a), std::span<const double>(b));
}

template <std::size_t N>
double squared_distance(const std::array<double, N>& a, const std::array<double, N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Kernels

/// height * exp(-d^2 / (2 width^2)).
struct GaussianProfile {
  double height = 1.0;
  double width = 1.0;
  double operator()(double distance) const {
    return height * std::exp(-0.5 * distance * distance / (width * width));
  }
};

/// height on |d| <= half_width, zero outside (the window kernel behind the
/// spatial normalized gamma process).
struct BoxProfile {
  double height = 1.0;
  double half_width = 1.0;
  double operator()(double distance) const { return distance <= half_width ? height : 0.0; }
};

using Profile = std::variant<GaussianProfile, BoxProfile>;

/// p(t) = f(|t - center|) for a unimodal profile f.
template <class Point = double>
struct SingleLocationKernel {
  Point center{};
  Profile profile = GaussianProfile{};
};

/// p(t) = Phi(w_0 + sum_l w_l exp(-width |t - t_l|^2)) with fixed centers t_l.
template <class Point = double>
struct ProbitRvmKernel {
  std::vector<double> weights;  // size centers.size() + 1, intercept first
  double width = 1.0;
  std::vector<Point> centers;
};

template <class Point = double>
using ThinningKernel = std::variant<SingleLocationKernel<Point>, ProbitRvmKernel<Point>>;

inline void validate_profile(const Profile& profile) {
  std::visit(
      [](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if (!(f.height >= 0.0 && f.height <= 1.0)) {
          throw ParameterError("profile height must lie in [0, 1]");
        }
        if constexpr (std::is_same_v<F, GaussianProfile>) {
          if (!(f.width > 0.0)) throw ParameterError("profile width must be positive");
        } else {
          if (!(f.half_width >= 0.0)) throw ParameterError("window half-width must be nonnegative");
        }
      },
      profile);
}

/// Fills `row` with (1, exp(-width |t - t_1|^2), ..., exp(-width |t - t_L|^2)).
template <class Point>
void design_row(std::span<const Point> centers, double width, const Point& t, std::span<double> row) {
  detail::require_same_size(centers.size() + 1, row.size(), "design row");
  row[0] = 1.0;
  for (std::size_t l = 0; l < centers.size(); ++l) {
    row[l + 1] = std::exp(-width * squared_distance(t, centers[l]));
  }
}

/// RVM expansion before the probit link.
template <class Point>
double activation(const ProbitRvmKernel<Point>& kernel, const Point& t) {
  detail::require_same_size(kernel.centers.size() + 1, kernel.weights.size(), "RVM weights");
  double a = kernel.weights[0];
  for (std::size_t l = 0; l < kernel.centers.size(); ++l) {
    a += kernel.weights[l + 1] * std::exp(-kernel.width * squared_distance(t, kernel.centers[l]));
  }
  return a;
}

template <class Point>
double thinning_probability(const ProbitRvmKernel<Point>& kernel, const Point& t) {
  return normal_cdf(activation(kernel, t));
}

template <class Point>
double thinning_probability(const SingleLocationKernel<Point>& kernel, const Point& t) {
  const double distance = std::sqrt(squared_distance(t, kernel.center));
  return std::clamp(std::visit([&](const auto& f) { return f(distance); }, kernel.profile), 0.0,
                    1.0);
}

template <class Point>
double thinning_probability(const ThinningKernel<Point>& kernel, const Point& t) {
  return std::visit([&](const auto& k) { return thinning_probability(k, t); }, kernel);
}

template <class Kernel, class Point>
std::vector<double> thinning_probabilities(std::span<const Kernel> kernels, const Point& t) {
  std::vector<double> p;
  p.reserve(kernels.size());
  for (const auto& k : kernels) p.push_back(thinning_probability(k, t));
  return p;
}

// ---------------------------------------------------------------------------
// Thinned measures

template <class Theta, class Location, class Point = double>
struct ThinnedMeasure {
  TruncatedCRM<Theta, Location> source;
  std::vector<std::uint8_t> indicators;
  Point covariate{};

  double mass(std::size_t k) const { return indicators[k] ? source.atoms[k].mass : 0.0; }

  double total_mass() const {
    double total = 0.0;
    for (std::size_t k = 0; k < indicators.size(); ++k) total += mass(k);
    return total;
  }

  std::size_t retained() const {
    return static_cast<std::size_t>(std::count(indicators.begin(), indicators.end(), 1));
  }
};

/// r_k ~ Ber(probs[k]) independently, written into `out`.
inline void draw_thinning_indicators(std::span<const double> probs, Rng& rng,
                                     std::span<std::uint8_t> out) {
  detail::require_same_size(probs.size(), out.size(), "thinning indicators");
  for (std::size_t k = 0; k < probs.size(); ++k) out[k] = bernoulli(rng, probs[k]) ? 1 : 0;
}

template <class Theta, class Location, class Point>
ThinnedMeasure<Theta, Location, Point> thin_with_probabilities(
    const TruncatedCRM<Theta, Location>& crm, std::span<const double> probs, const Point& t,
    Rng& rng) {
  detail::require_same_size(crm.size(), probs.size(), "thinning probabilities");
  ThinnedMeasure<Theta, Location, Point> m{crm, std::vector<std::uint8_t>(crm.size()), t};
  draw_thinning_indicators(probs, rng, m.indicators);
  return m;
}

/// Keeps atom k at covariate t with probability p_{x_k}(t).
template <class Theta, class Location, class Kernel, class Point>
ThinnedMeasure<Theta, Location, Point> thin(const TruncatedCRM<Theta, Location>& crm,
                                            std::span<const Kernel> kernels, const Point& t,
                                            Rng& rng) {
  detail::require_same_size(crm.size(), kernels.size(), "thinning kernels");
  const auto p = thinning_probabilities(kernels, t);
  return thin_with_probabilities(crm, std::span<const double>(p), t, rng);
}

/// Correlation of the thinned total masses at two covariates,
///
///   sum_k v_k p_k q_k / sqrt(sum_k v_k p_k * sum_k v_k q_k),
///
/// where v_k is the variance of atom mass k (all equal when omitted). The
/// denominator uses E[r^2] = E[r] = p, i.e. plain sums of p, not of p^2.
inline double correlation(std::span<const double> p, std::span<const double> q,
                          std::optional<std::span<const double>> variances = std::nullopt) {
  detail::require_same_size(p.size(), q.size(), "correlation");
  if (variances) detail::require_same_size(p.size(), variances->size(), "correlation variances");
  double cross = 0.0, sp = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < 0.0 || p[k] > 1.0 || q[k] < 0.0 || q[k] > 1.0) {
      throw ParameterError("thinning probabilities must lie in [0, 1]");
    }
    const double v = variances ? (*variances)[k] : 1.0;
    if (!(v > 0.0)) throw ParameterError("atom variances must be positive");
    cross += v * p[k] * q[k];
    sp += v * p[k];
    sq += v * q[k];
  }
  if (sp <= 0.0 || sq <= 0.0) {
    throw UndefinedCorrelationError("correlation undefined for an all-zero thinning vector");
  }
  return std::clamp(cross / std::sqrt(sp * sq), 0.0, 1.0);
}

/// Per-atom expected thinned masses p_{x_k}(t) pi_k.
template <class Theta, class Location, class Kernel, class Point>
std::vector<double> kbp_expectation(const TruncatedCRM<Theta, Location>& crm,
                                    std::span<const Kernel> kernels, const Point& t) {
  detail::require_same_size(crm.size(), kernels.size(), "thinning kernels");
  std::vector<double> out(crm.size());
  for (std::size_t k = 0; k < crm.size(); ++k) {
    out[k] = thinning_probability(kernels[k], t) * crm.atoms[k].mass;
  }
  return out;
}

struct NormalizedMeasure {
  std::vector<std::size_t> atoms;  // indices of retained atoms
  std::vector<double> weights;     // sums to one
};

/// Normalizes the retained masses into a probability vector.
template <class Theta, class Location, class Point>
NormalizedMeasure normalize(const ThinnedMeasure<Theta, Location, Point>& m) {
  NormalizedMeasure out;
  double total = 0.0;
  for (std::size_t k = 0; k < m.indicators.size(); ++k) {
    if (!m.indicators[k]) continue;
    out.atoms.push_back(k);
    out.weights.push_back(m.source.atoms[k].mass);
    total += m.source.atoms[k].mass;
  }
  if (!(total > 0.0)) throw EmptyMeasureError("cannot normalize a measure with zero retained mass");
  for (auto& w : out.weights) w /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Probit-RVM Gibbs block

/// Hyperparameters of the RVM weights and widths, plus the per-weight
/// precisions lambda_l (omega_l ~ N(0, 1/lambda_l), lambda_l ~ Ga(c0, d0)).
struct RvmPrior {
  double c0 = 1.0;
  double d0 = 1.0;
  std::vector<double> width_dictionary{1.0};
  std::vector<double> precisions;

  void validate() const {
    if (!(c0 > 0.0) || !(d0 > 0.0)) throw ParameterError("c0 and d0 must be positive");
    if (width_dictionary.empty()) throw ParameterError("width dictionary must be nonempty");
    for (double w : width_dictionary) {
      if (!(w > 0.0)) throw ParameterError("kernel widths must be positive");
    }
    for (double l : precisions) {
      if (!(l > 0.0)) throw ParameterError("RVM precisions must be positive");
    }
  }
};

/// Indicators observed at one covariate value, summarized by counts.
template <class Point = double>
struct RvmObservation {
  Point covariate{};
  std::uint32_t active = 0;
  std::uint32_t inactive = 0;
};

/// Forward draw of a kernel (and its precisions) from the prior.
template <class Point>
ProbitRvmKernel<Point> sample_rvm_kernel(std::vector<Point> centers, RvmPrior& prior, Rng& rng) {
  prior.validate();
  ProbitRvmKernel<Point> kernel;
  kernel.centers = std::move(centers);
  const std::size_t n = kernel.centers.size() + 1;
  prior.precisions.resize(n);
  kernel.weights.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    prior.precisions[l] = gamma(rng, prior.c0, prior.d0);
    kernel.weights[l] = normal(rng, 0.0, 1.0 / std::sqrt(prior.precisions[l]));
  }
  kernel.width = prior.width_dictionary[std::min(
      prior.width_dictionary.size() - 1,
      static_cast<std::size_t>(uniform01(rng) * static_cast<double>(prior.width_dictionary.size())))];
  return kernel;
}

/// Unnormalized log posterior of each dictionary width given the indicators,
/// sum_j [a_j log p_j + i_j log(1 - p_j)], under a uniform prior.
template <class Point>
std::vector<double> width_log_weights(std::span<const RvmObservation<Point>> observations,
                                      const ProbitRvmKernel<Point>& kernel,
                                      std::span<const double> dictionary) {
  std::vector<double> out(dictionary.size(), 0.0);
  ProbitRvmKernel<Point> probe = kernel;
  for (std::size_t m = 0; m < dictionary.size(); ++m) {
    probe.width = dictionary[m];
    for (const auto& obs : observations) {
      const double a = activation(probe, obs.covariate);
      if (obs.active) out[m] += obs.active * log_normal_cdf(a);
      if (obs.inactive) out[m] += obs.inactive * log_normal_cdf(-a);
    }
  }
  return out;
}

/// Sufficient statistics of the probit augmentation: the precision
/// diag(lambda) + D^T D and the vector D^T r~, where D stacks one design row
/// per observation and r~ are fresh truncated-normal auxiliaries.
struct RvmAugmentation {
  Eigen::MatrixXd precision;
  Eigen::VectorXd rhs;
};

/// Draws r~ ~ N(activation, 1) restricted to r~ > 0 when r = 1 and r~ < 0
/// when r = 0, and accumulates the weight-posterior statistics.
template <class Point>
RvmAugmentation sample_rvm_auxiliaries(std::span<const RvmObservation<Point>> observations,
                                       const ProbitRvmKernel<Point>& kernel,
                                       const RvmPrior& prior, Rng& rng) {
  const std::size_t n = kernel.centers.size() + 1;
  const auto en = static_cast<Eigen::Index>(n);
  detail::require_same_size(n, kernel.weights.size(), "RVM weights");
  detail::require_same_size(n, prior.precisions.size(), "RVM precisions");
  RvmAugmentation aug{Eigen::MatrixXd::Zero(en, en), Eigen::VectorXd::Zero(en)};
  Eigen::VectorXd row(en);
  const std::span<const Point> centers(kernel.centers);
  const Eigen::Map<const Eigen::VectorXd> weights(kernel.weights.data(), en);
  for (const auto& obs : observations) {
    const std::uint32_t count = obs.active + obs.inactive;
    if (count == 0) continue;
    design_row(centers, kernel.width, obs.covariate, std::span<double>(row.data(), n));
    const double mean = row.dot(weights);
    double aux_sum = 0.0;
    for (std::uint32_t i = 0; i < obs.active; ++i) aux_sum += truncated_normal_positive(rng, mean);
    for (std::uint32_t i = 0; i < obs.inactive; ++i) aux_sum += truncated_normal_negative(rng, mean);
    aug.precision.noalias() += static_cast<double>(count) * row * row.transpose();
    aug.rhs += aux_sum * row;
  }
  for (Eigen::Index l = 0; l < en; ++l) aug.precision(l, l) += prior.precisions[static_cast<std::size_t>(l)];
  return aug;
}

/// omega ~ N(Q^{-1} D^T r~, Q^{-1}).
template <class Point>
void sample_rvm_weights(const RvmAugmentation& aug, ProbitRvmKernel<Point>& kernel, Rng& rng) {
  const Eigen::LLT<Eigen::MatrixXd> chol(aug.precision);
  if (chol.info() != Eigen::Success) {
    throw NumericalError("RVM weight posterior precision is not positive definite");
  }
  const Eigen::VectorXd mean = chol.solve(aug.rhs);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index l = 0; l < z.size(); ++l) z[l] = standard_normal(rng);
  const Eigen::VectorXd draw = mean + chol.matrixU().solve(z);
  if (!draw.allFinite()) throw NumericalError("non-finite RVM weight draw");
  kernel.weights.assign(draw.data(), draw.data() + draw.size());
}

/// lambda_l ~ Ga(c0 + 1/2, d0 + omega_l^2 / 2).
template <class Point>
void sample_rvm_precisions(const ProbitRvmKernel<Point>& kernel, RvmPrior& prior, Rng& rng) {
  prior.precisions.resize(kernel.weights.size());
  for (std::size_t l = 0; l < kernel.weights.size(); ++l) {
    const double w = kernel.weights[l];
    prior.precisions[l] = gamma(rng, prior.c0 + 0.5, prior.d0 + 0.5 * w * w);
  }
}

/// Width from the dictionary with mass proportional to prod p^r (1 - p)^(1 - r).
template <class Point>
void sample_rvm_width(std::span<const RvmObservation<Point>> observations,
                      ProbitRvmKernel<Point>& kernel, const RvmPrior& prior, Rng& rng) {
  if (prior.width_dictionary.size() == 1) {
    kernel.width = prior.width_dictionary.front();
    return;
  }
  const auto log_w =
      width_log_weights(observations, kernel, std::span<const double>(prior.width_dictionary));
  kernel.width = prior.width_dictionary[categorical_log(rng, log_w)];
}

/// One Gibbs pass over the probit-RVM block of a single kernel: auxiliaries,
/// weights, precisions, then width.
template <class Point>
void rvm_gibbs_block(std::span<const RvmObservation<Point>> observations,
                     ProbitRvmKernel<Point>& kernel, RvmPrior& prior, Rng& rng) {
  const std::size_t n = kernel.centers.size() + 1;
  detail::require_same_size(n, kernel.weights.size(), "RVM weights");
  if (prior.precisions.size() != n) prior.precisions.assign(n, 1.0);
  prior.validate();
  const auto aug = sample_rvm_auxiliaries(observations, kernel, prior, rng);
  sample_rvm_weights(aug, kernel, rng);
  sample_rvm_precisions(kernel, prior, rng);
  sample_rvm_width(observations, kernel, prior, rng);
}

}  // namespace tcrm
